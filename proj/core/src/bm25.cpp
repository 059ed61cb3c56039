#include "distillrank/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "distillrank/error.hpp"
#include "distillrank/rng.hpp"

namespace distillrank {

namespace {

constexpr int kIndexFormatVersion = 1;

bool is_ascii_alnum(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

double term_contribution(double idf, double tf, double dl, double avgdl,
                         const Bm25Params& params) {
    const double norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl);
    return idf * tf * (params.k1 + 1.0) / (tf + norm);
}

void validate(const Bm25Params& params) {
    if (!(params.k1 > 0.0)) throw ConfigError("bm25 k1 must be > 0");
    if (!(params.b >= 0.0 && params.b <= 1.0)) throw ConfigError("bm25 b must be in [0, 1]");
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_ascii_alnum(c)) {
            current.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

InvertedIndex InvertedIndex::build(std::span<const Document> docs) {
    if (docs.empty()) throw ConfigError("cannot index an empty corpus");
    InvertedIndex index;
    index.doc_ids_.reserve(docs.size());
    index.doc_len_.reserve(docs.size());
    std::uint64_t total_tokens = 0;
    for (const auto& doc : docs) {
        const auto ord = static_cast<std::uint32_t>(index.doc_ids_.size());
        if (!index.ord_by_id_.emplace(doc.id, ord).second)
            throw ConfigError("duplicate document id \"" + doc.id + "\"");
        index.doc_ids_.push_back(doc.id);
        const auto tokens = tokenize(passage_text(doc));
        index.doc_len_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total_tokens += tokens.size();
        std::map<std::string, std::uint32_t> tf;  // ordered: postings stay sorted by term later
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf)
            index.postings_[term].push_back({ord, count});
    }
    index.avgdl_ = static_cast<double>(total_tokens) / static_cast<double>(docs.size());
    return index;
}

std::optional<std::uint32_t> InvertedIndex::ordinal(std::string_view doc_id) const {
    auto it = ord_by_id_.find(std::string(doc_id));
    if (it == ord_by_id_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t InvertedIndex::doc_freq(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    return it == postings_.end() ? 0 : static_cast<std::uint32_t>(it->second.size());
}

const std::vector<Posting>* InvertedIndex::postings(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    return it == postings_.end() ? nullptr : &it->second;
}

void InvertedIndex::save(const std::filesystem::path& path) const {
    nlohmann::ordered_json j;
    j["format"] = "distillrank.index";
    j["version"] = kIndexFormatVersion;
    j["doc_ids"] = doc_ids_;
    j["doc_lengths"] = doc_len_;
    // sorted term order keeps the file deterministic
    std::map<std::string, const std::vector<Posting>*> sorted;
    for (const auto& [term, plist] : postings_) sorted.emplace(term, &plist);
    auto& terms = j["postings"] = nlohmann::ordered_json::object();
    for (const auto& [term, plist] : sorted) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& p : *plist) arr.push_back({p.doc, p.tf});
        terms[term] = std::move(arr);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump() << '\n';
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("format", "") != "distillrank.index")
        throw ParseError(path.string() + ": not a distillrank index file");
    if (j.value("version", 0) != kIndexFormatVersion)
        throw ParseError(path.string() + ": unsupported index version");
    InvertedIndex index;
    index.doc_ids_ = j.at("doc_ids").get<std::vector<std::string>>();
    index.doc_len_ = j.at("doc_lengths").get<std::vector<std::uint32_t>>();
    if (index.doc_ids_.size() != index.doc_len_.size())
        throw ParseError(path.string() + ": doc_ids/doc_lengths size mismatch");
    std::uint64_t total_tokens = 0;
    for (std::uint32_t ord = 0; ord < index.doc_ids_.size(); ++ord) {
        index.ord_by_id_.emplace(index.doc_ids_[ord], ord);
        total_tokens += index.doc_len_[ord];
    }
    if (index.doc_ids_.empty()) throw ParseError(path.string() + ": empty index");
    index.avgdl_ = static_cast<double>(total_tokens) / static_cast<double>(index.doc_ids_.size());
    for (const auto& [term, arr] : j.at("postings").items()) {
        std::vector<Posting> plist;
        plist.reserve(arr.size());
        for (const auto& p : arr)
            plist.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
        index.postings_.emplace(term, std::move(plist));
    }
    return index;
}

double bm25_idf(const InvertedIndex& index, std::string_view term) {
    const double df = index.doc_freq(term);
    const double n = static_cast<double>(index.doc_count());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double bm25_score(const InvertedIndex& index, const Bm25Params& params,
                  std::span<const std::string> query_terms, std::string_view doc_id) {
    validate(params);
    const auto ord = index.ordinal(doc_id);
    if (!ord) throw ConfigError("unknown document id \"" + std::string(doc_id) + "\"");
    const double dl = index.doc_length(*ord);
    double score = 0.0;
    for (const auto& term : query_terms) {
        const auto* plist = index.postings(term);
        if (!plist) continue;
        auto it = std::lower_bound(plist->begin(), plist->end(), *ord,
                                   [](const Posting& p, std::uint32_t o) { return p.doc < o; });
        if (it == plist->end() || it->doc != *ord) continue;
        score += term_contribution(bm25_idf(index, term), it->tf, dl, index.avg_doc_length(),
                                   params);
    }
    return score;
}

double bm25_score_for_text(const InvertedIndex& index, const Bm25Params& params,
                           std::span<const std::string> query_terms, std::string_view doc_text) {
    validate(params);
    const auto doc_terms = tokenize(doc_text);
    std::unordered_map<std::string, std::uint32_t> tf;
    for (const auto& t : doc_terms) ++tf[t];
    const double dl = static_cast<double>(doc_terms.size());
    double score = 0.0;
    for (const auto& term : query_terms) {
        auto it = tf.find(term);
        if (it == tf.end()) continue;
        score += term_contribution(bm25_idf(index, term), it->second, dl,
                                   index.avg_doc_length(), params);
    }
    return score;
}

std::vector<SearchHit> search_topk(const InvertedIndex& index, const Bm25Params& params,
                                   std::string_view query_text, std::size_t k) {
    validate(params);
    if (k == 0) throw ConfigError("search_topk requires k >= 1");
    const auto query_terms = tokenize(query_text);
    std::vector<double> acc(index.doc_count(), 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<bool> seen(index.doc_count(), false);
    for (const auto& term : query_terms) {
        const auto* plist = index.postings(term);
        if (!plist) continue;
        const double idf = bm25_idf(index, term);
        for (const auto& p : *plist) {
            acc[p.doc] += term_contribution(idf, p.tf, index.doc_length(p.doc),
                                            index.avg_doc_length(), params);
            if (!seen[p.doc]) {
                seen[p.doc] = true;
                touched.push_back(p.doc);
            }
        }
    }
    std::vector<SearchHit> hits;
    hits.reserve(touched.size());
    for (auto ord : touched) hits.push_back({index.doc_id(ord), acc[ord]});
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

std::vector<std::string> sample_negatives(const InvertedIndex& index, const Bm25Params& params,
                                          std::string_view query_id, std::string_view query_text,
                                          const std::unordered_set<std::string>& positives,
                                          const SamplerConfig& cfg) {
    if (cfg.pool_k < 1) throw ConfigError("sampler pool_k must be >= 1");
    if (cfg.negatives_per_positive < 1)
        throw ConfigError("sampler negatives_per_positive must be >= 1");
    auto hits = search_topk(index, params, query_text, static_cast<std::size_t>(cfg.pool_k));
    std::vector<std::string> pool;
    pool.reserve(hits.size());
    for (auto& h : hits)
        if (!positives.contains(h.doc_id)) pool.push_back(std::move(h.doc_id));
    const std::size_t want =
        static_cast<std::size_t>(cfg.negatives_per_positive) * positives.size();
    const std::size_t n = std::min(want, pool.size());
    Rng rng(mix_seed(cfg.seed, fnv1a64(query_id)));
    auto picks = rng.sample_without_replacement(pool.size(), n);
    std::vector<std::string> out;
    out.reserve(n);
    for (auto i : picks) out.push_back(std::move(pool[i]));
    return out;
}

}  // namespace distillrank
