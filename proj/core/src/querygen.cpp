#include "distillrank/querygen.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "distillrank/error.hpp"
#include "distillrank/rng.hpp"
#include "distillrank/text.hpp"

namespace distillrank {

namespace {

constexpr std::string_view kPlaceholder = "{document}";

std::size_t count_placeholders(std::string_view text) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(kPlaceholder, pos)) != std::string_view::npos) {
        ++count;
        pos += kPlaceholder.size();
    }
    return count;
}

std::string substitute(std::string_view text, std::string_view document) {
    const auto pos = text.find(kPlaceholder);
    std::string out(text.substr(0, pos));
    out.append(document);
    out.append(text.substr(pos + kPlaceholder.size()));
    return out;
}

}  // namespace

void validate(const GenConfig& cfg) {
    if (cfg.n_queries < 1) throw ConfigError("generator n_queries must be >= 1");
    if (cfg.min_terms < 1) throw ConfigError("generator min_terms must be >= 1");
    if (cfg.max_terms < cfg.min_terms)
        throw ConfigError("generator max_terms must be >= min_terms");
}

void PromptTemplate::validate() const {
    if (count_placeholders(template_text) != 1)
        throw ConfigError("prompt template must contain {document} exactly once");
}

std::string PromptTemplate::render(std::string_view document) const {
    validate();
    std::string prompt;
    for (const auto& [ex_doc, ex_query] : few_shot_examples) {
        prompt += substitute(template_text, ex_doc);
        prompt += ' ';
        prompt += ex_query;
        prompt += "\n\n";
    }
    prompt += substitute(template_text, document);
    return prompt;
}

Query extractive_generate(const Document& doc, const InvertedIndex& corpus_stats,
                          const GenConfig& cfg, std::uint64_t draw_index) {
    validate(cfg);
    const auto tokens = tokenize(passage_text(doc));
    if (tokens.empty())
        throw ConfigError("document \"" + doc.id + "\" has no tokens to generate from");

    std::map<std::string, std::uint32_t> tf;  // ordered map fixes the tie ordering
    for (const auto& t : tokens) ++tf[t];

    struct Scored {
        double score;
        const std::string* term;
    };
    std::vector<Scored> scored;
    scored.reserve(tf.size());
    for (const auto& [term, count] : tf)
        scored.push_back({static_cast<double>(count) * bm25_idf(corpus_stats, term), &term});
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        return a.score > b.score;  // stable: equal scores keep lexicographic order
    });

    Rng rng(mix_seed(cfg.seed, draw_index));
    const auto span = static_cast<std::uint64_t>(cfg.max_terms - cfg.min_terms + 1);
    const std::size_t m = static_cast<std::size_t>(cfg.min_terms + rng.uniform_below(span));
    const std::size_t take = std::min(m, scored.size());

    std::string text;
    for (std::size_t i = 0; i < take; ++i) {
        if (!text.empty()) text += ' ';
        text += *scored[i].term;
    }
    return {"syn-" + std::to_string(draw_index), std::move(text), QueryOrigin::synthetic};
}

ExtractiveGenerator::ExtractiveGenerator(const InvertedIndex* corpus_stats, GenConfig cfg)
    : stats_(corpus_stats), cfg_(cfg) {
    if (stats_ == nullptr) throw ConfigError("extractive generator requires corpus statistics");
    validate(cfg_);
}

std::optional<Query> ExtractiveGenerator::generate(const Document& doc,
                                                   std::uint64_t draw_index) {
    return extractive_generate(doc, *stats_, cfg_, draw_index);
}

// ---------------------------------------------------------------------------
// LLM client mode

struct LlmGenerator::Impl {
    LlmClientConfig cfg;
    PromptTemplate prompt;

    std::string generate_text(const std::string& rendered) const {
        std::string last_error;
        for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
            httplib::Client client(cfg.endpoint_url);
            client.set_connection_timeout(cfg.timeout_ms / 1000,
                                          (cfg.timeout_ms % 1000) * 1000);
            client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
            nlohmann::json body{{"prompt", rendered}};
            auto res = client.Post("/generate", body.dump(), "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            auto j = nlohmann::json::parse(res->body, nullptr, false);
            if (j.is_discarded() || !j.contains("text") || !j["text"].is_string())
                throw RemoteError("malformed /generate response");
            return j["text"].get<std::string>();
        }
        throw RemoteError("LLM /generate failed after " + std::to_string(cfg.retries + 1) +
                          " attempts: " + last_error);
    }
};

LlmGenerator::LlmGenerator(LlmClientConfig cfg, PromptTemplate prompt)
    : impl_(std::make_unique<Impl>(Impl{std::move(cfg), std::move(prompt)})) {
    if (impl_->cfg.endpoint_url.empty()) throw ConfigError("LLM endpoint_url is empty");
    impl_->prompt.validate();
}

LlmGenerator::~LlmGenerator() = default;

std::optional<Query> LlmGenerator::generate(const Document& doc, std::uint64_t draw_index) {
    const auto text = impl_->generate_text(impl_->prompt.render(passage_text(doc)));
    // first output line is the query
    std::string_view view(text);
    const auto eol = view.find('\n');
    const auto line = trim(eol == std::string_view::npos ? view : view.substr(0, eol));
    if (line.empty()) return std::nullopt;  // caller skips this document
    return Query{"syn-" + std::to_string(draw_index), std::string(line),
                 QueryOrigin::synthetic};
}

std::vector<SyntheticPair> build_synthetic_pairs(std::span<const Document> corpus,
                                                 QueryGenerator& generator,
                                                 const GenConfig& cfg) {
    validate(cfg);
    if (corpus.empty()) throw ConfigError("cannot generate queries from an empty corpus");
    const auto n = static_cast<std::size_t>(cfg.n_queries);

    Rng rng(cfg.seed);
    std::vector<std::size_t> picks;
    if (n <= corpus.size()) {
        picks = rng.sample_without_replacement(corpus.size(), n);
    } else {
        picks.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            picks.push_back(static_cast<std::size_t>(rng.uniform_below(corpus.size())));
    }

    std::vector<SyntheticPair> pairs;
    pairs.reserve(n);
    for (std::size_t draw = 0; draw < picks.size(); ++draw) {
        const auto& doc = corpus[picks[draw]];
        auto query = generator.generate(doc, draw);
        if (!query) continue;  // generator flagged this document for skipping
        pairs.push_back({std::move(*query), doc.id});
    }
    return pairs;
}

void write_pairs(const std::filesystem::path& path, std::span<const QueryDocPair> pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& p : pairs) {
        nlohmann::ordered_json j{{"query_id", p.query_id}, {"doc_id", p.doc_id}};
        out << j.dump() << '\n';
    }
}

std::vector<QueryDocPair> read_pairs(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::vector<QueryDocPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("query_id") ||
            !j.contains("doc_id"))
            throw ParseError(path.string(), line_no, "malformed query-doc pair");
        pairs.push_back({j["query_id"].get<std::string>(), j["doc_id"].get<std::string>()});
    }
    return pairs;
}

}  // namespace distillrank
