#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "distillrank/types.hpp"

namespace distillrank {

/// Lucene-style BM25 defaults.
struct Bm25Params {
    double k1 = 0.9;  // > 0
    double b = 0.4;   // in [0, 1]
};

struct SamplerConfig {
    int pool_k = 1000;               // >= 1, candidate pool depth
    int negatives_per_positive = 9;  // >= 1
    std::uint64_t seed = 0;
};

/// Lowercases and splits on any non-alphanumeric codepoint; empty tokens
/// dropped. No stemming, no stopwords.
std::vector<std::string> tokenize(std::string_view text);

struct Posting {
    std::uint32_t doc = 0;  // ordinal into doc_ids()
    std::uint32_t tf = 0;   // >= 1
};

/// In-memory inverted index over passage_text(doc). Immutable after build;
/// concurrent read access is safe.
class InvertedIndex {
  public:
    static InvertedIndex build(std::span<const Document> docs);

    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const { return avgdl_; }
    const std::string& doc_id(std::uint32_t ord) const { return doc_ids_[ord]; }
    std::uint32_t doc_length(std::uint32_t ord) const { return doc_len_[ord]; }
    std::optional<std::uint32_t> ordinal(std::string_view doc_id) const;

    std::size_t term_count() const { return postings_.size(); }
    /// Document frequency; 0 for unseen terms.
    std::uint32_t doc_freq(std::string_view term) const;
    /// Postings sorted by doc ordinal, or nullptr for unseen terms.
    const std::vector<Posting>* postings(std::string_view term) const;

    /// Versioned JSON persistence; load(save(x)) reproduces identical search
    /// results.
    void save(const std::filesystem::path& path) const;
    static InvertedIndex load(const std::filesystem::path& path);

  private:
    std::vector<std::string> doc_ids_;  // ordinal order = corpus order
    std::unordered_map<std::string, std::uint32_t> ord_by_id_;
    std::vector<std::uint32_t> doc_len_;
    double avgdl_ = 0.0;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
};

/// ln(1 + (N - df + 0.5) / (df + 0.5)) — the +1-smoothed log IDF.
double bm25_idf(const InvertedIndex& index, std::string_view term);

/// Sum over query term occurrences present in the doc of
/// idf * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)). A term repeated in the
/// query contributes once per occurrence. Throws on unknown doc ids.
double bm25_score(const InvertedIndex& index, const Bm25Params& params,
                  std::span<const std::string> query_terms, std::string_view doc_id);

/// Same formula with tf and dl taken from doc_text itself; corpus statistics
/// (df, N, avgdl) come from the index. Works for text outside the corpus.
double bm25_score_for_text(const InvertedIndex& index, const Bm25Params& params,
                           std::span<const std::string> query_terms, std::string_view doc_text);

struct SearchHit {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const SearchHit&) const = default;
};

/// Top-k candidates sorted by (score desc, doc_id asc). Only documents
/// matching at least one query term are returned.
std::vector<SearchHit> search_topk(const InvertedIndex& index, const Bm25Params& params,
                                   std::string_view query_text, std::size_t k);

/// Negative sampling over the BM25 candidate pool: draws up to
/// negatives_per_positive * |positives| distinct non-positive doc ids
/// uniformly without replacement from search_topk(query, pool_k). The draw is
/// seeded by (cfg.seed, query_id), so it is reproducible per query.
std::vector<std::string> sample_negatives(const InvertedIndex& index, const Bm25Params& params,
                                          std::string_view query_id, std::string_view query_text,
                                          const std::unordered_set<std::string>& positives,
                                          const SamplerConfig& cfg);

}  // namespace distillrank
