#include "distillrank/teacher.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <thread>
#include <unordered_set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "distillrank/error.hpp"
#include "distillrank/rng.hpp"
#include "distillrank/text.hpp"

namespace distillrank {

namespace {

void require_nonempty(std::span<const ScoreRequest> batch) {
    if (batch.empty()) throw ConfigError("teacher batch must be non-empty");
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::unordered_set<std::string> sa(a.begin(), a.end());
    std::unordered_set<std::string> sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : sa)
        if (sb.contains(t)) ++inter;
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

std::string cache_key(std::string_view teacher_id, std::string_view query_id,
                      std::string_view doc_id) {
    std::string key;
    key.reserve(teacher_id.size() + query_id.size() + doc_id.size() + 2);
    key.append(teacher_id);
    key.push_back('\x1f');
    key.append(query_id);
    key.push_back('\x1f');
    key.append(doc_id);
    return key;
}

}  // namespace

std::vector<ScoredPair> teacher_score_all(Teacher& teacher, std::span<const ScoreRequest> batch) {
    auto logits = teacher.score_batch(batch);
    std::vector<ScoredPair> out;
    out.reserve(batch.size());
    const auto id = teacher.id();
    for (std::size_t i = 0; i < batch.size(); ++i)
        out.push_back({batch[i].query_id, batch[i].doc_id, logits[i], id});
    return out;
}

LogitPair planted_teacher_logits(const PlantedTeacherParams& params, std::string_view query_text,
                                 std::string_view doc_text, const InvertedIndex& index,
                                 const Bm25Params& bm25) {
    if (!(params.scale > 0.0)) throw ConfigError("planted teacher scale must be > 0");
    const auto query_terms = tokenize(query_text);
    const auto doc_terms = tokenize(doc_text);
    const double s = bm25_score_for_text(index, bm25, query_terms, doc_text);
    const double m = params.weight_overlap * jaccard(query_terms, doc_terms) +
                     params.weight_bm25 * (s / (1.0 + s)) + params.bias;
    return {params.scale * m, -params.scale * m};
}

PlantedTeacher::PlantedTeacher(PlantedTeacherParams params, const InvertedIndex* index,
                               Bm25Params bm25)
    : params_(params), index_(index), bm25_(bm25) {
    if (index_ == nullptr) throw ConfigError("planted teacher requires an index");
    // identity reflects the parameters so cache entries never cross teachers
    std::string blob;
    for (double v : {params.weight_overlap, params.weight_bm25, params.bias, params.scale,
                     bm25.k1, bm25.b})
        blob += format_double(v) + ",";
    id_ = "planted:" + to_hex(fnv1a64(blob));
}

std::vector<LogitPair> PlantedTeacher::score_batch(std::span<const ScoreRequest> batch) {
    require_nonempty(batch);
    std::vector<LogitPair> out;
    out.reserve(batch.size());
    for (const auto& req : batch)
        out.push_back(planted_teacher_logits(params_, req.query_text, req.doc_text, *index_,
                                             bm25_));
    return out;
}

// ---------------------------------------------------------------------------
// Remote teacher

struct RemoteTeacher::Impl {
    RemoteTeacherConfig cfg;

    explicit Impl(RemoteTeacherConfig c) : cfg(std::move(c)) {
        if (cfg.endpoint_url.empty()) throw ConfigError("remote teacher endpoint_url is empty");
        if (cfg.batch_size < 1) throw ConfigError("remote teacher batch_size must be >= 1");
        if (cfg.max_in_flight < 1) throw ConfigError("remote teacher max_in_flight must be >= 1");
        if (cfg.retries < 0) throw ConfigError("remote teacher retries must be >= 0");
        if (cfg.id.empty()) cfg.id = "remote:" + cfg.endpoint_url;
    }

    std::vector<LogitPair> score_sub_batch(std::span<const ScoreRequest> sub,
                                           std::size_t offset) const {
        nlohmann::json body;
        auto& pairs = body["pairs"] = nlohmann::json::array();
        for (const auto& req : sub)
            pairs.push_back({{"query", req.query_text}, {"text", req.doc_text}});
        const std::string payload = body.dump();

        const std::string where = "pairs [" + std::to_string(offset) + ", " +
                                  std::to_string(offset + sub.size()) + ")";
        std::string last_error;
        for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
            httplib::Client client(cfg.endpoint_url);
            client.set_connection_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
            client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
            auto res = client.Post("/score", payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            auto j = nlohmann::json::parse(res->body, nullptr, false);
            if (j.is_discarded() || !j.contains("logits") || !j["logits"].is_array())
                throw RemoteError("malformed /score response for " + where);
            const auto& arr = j["logits"];
            if (arr.size() != sub.size())
                throw RemoteError("/score returned " + std::to_string(arr.size()) +
                                  " logits for " + std::to_string(sub.size()) + " pairs (" +
                                  where + ")");
            std::vector<LogitPair> out;
            out.reserve(arr.size());
            for (const auto& item : arr) {
                LogitPair p{item.at("true").get<double>(), item.at("false").get<double>()};
                if (!p.finite()) throw RemoteError("non-finite logits in response for " + where);
                out.push_back(p);
            }
            return out;
        }
        throw RemoteError("teacher /score failed after " + std::to_string(cfg.retries + 1) +
                          " attempts for " + where + ": " + last_error);
    }
};

RemoteTeacher::RemoteTeacher(RemoteTeacherConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(cfg))) {}

RemoteTeacher::~RemoteTeacher() = default;

std::string RemoteTeacher::id() const { return impl_->cfg.id; }

std::vector<LogitPair> RemoteTeacher::score_batch(std::span<const ScoreRequest> batch) {
    require_nonempty(batch);
    const auto batch_size = static_cast<std::size_t>(impl_->cfg.batch_size);
    const std::size_t n_sub = (batch.size() + batch_size - 1) / batch_size;

    std::vector<LogitPair> out(batch.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::string first_error;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_sub) return;
            const std::size_t begin = i * batch_size;
            const std::size_t len = std::min(batch_size, batch.size() - begin);
            try {
                auto logits = impl_->score_sub_batch(batch.subspan(begin, len), begin);
                std::copy(logits.begin(), logits.end(), out.begin() + begin);
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                if (first_error.empty()) first_error = e.what();
                next.store(n_sub);  // stop handing out work
                return;
            }
        }
    };

    const std::size_t n_workers =
        std::min(static_cast<std::size_t>(impl_->cfg.max_in_flight), n_sub);
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (!first_error.empty()) throw RemoteError(first_error);
    return out;
}

// ---------------------------------------------------------------------------
// Logit cache

LogitCache::LogitCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;  // fresh cache
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("teacher_id") ||
            !j.contains("query_id") || !j.contains("doc_id") || !j.contains("l_true") ||
            !j.contains("l_false") || !j["l_true"].is_number() || !j["l_false"].is_number()) {
            ++corrupt_lines_;
            std::cerr << "warning: " << path_.string() << ":" << line_no
                      << ": skipping corrupt cache line\n";
            continue;
        }
        LogitPair logits{j["l_true"].get<double>(), j["l_false"].get<double>()};
        entries_[cache_key(j["teacher_id"].get<std::string>(), j["query_id"].get<std::string>(),
                           j["doc_id"].get<std::string>())] = logits;  // last write wins
    }
}

std::optional<LogitPair> LogitCache::get(std::string_view teacher_id, std::string_view query_id,
                                         std::string_view doc_id) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(cache_key(teacher_id, query_id, doc_id));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void LogitCache::put(std::string_view teacher_id, std::string_view query_id,
                     std::string_view doc_id, const LogitPair& logits) {
    if (!logits.finite()) throw ConfigError("refusing to cache non-finite logits");
    std::lock_guard lock(mutex_);
    entries_[cache_key(teacher_id, query_id, doc_id)] = logits;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to cache: " + path_.string());
    nlohmann::ordered_json j{{"teacher_id", std::string(teacher_id)},
                             {"query_id", std::string(query_id)},
                             {"doc_id", std::string(doc_id)},
                             {"l_true", logits.l_true},
                             {"l_false", logits.l_false}};
    out << j.dump() << '\n';
}

std::size_t LogitCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::vector<LogitPair> CachedTeacher::score_batch(std::span<const ScoreRequest> batch) {
    require_nonempty(batch);
    const auto teacher_id = inner_->id();
    std::vector<LogitPair> out(batch.size());
    std::vector<std::size_t> misses;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (auto hit = cache_->get(teacher_id, batch[i].query_id, batch[i].doc_id)) {
            out[i] = *hit;
        } else {
            misses.push_back(i);
        }
    }
    if (!misses.empty()) {
        std::vector<ScoreRequest> miss_batch;
        miss_batch.reserve(misses.size());
        for (auto i : misses) miss_batch.push_back(batch[i]);
        auto fresh = inner_->score_batch(miss_batch);
        for (std::size_t k = 0; k < misses.size(); ++k) {
            const auto i = misses[k];
            out[i] = fresh[k];
            cache_->put(teacher_id, batch[i].query_id, batch[i].doc_id, fresh[k]);
        }
    }
    return out;
}

}  // namespace distillrank
