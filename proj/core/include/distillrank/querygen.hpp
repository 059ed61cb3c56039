#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distillrank/bm25.hpp"
#include "distillrank/types.hpp"

namespace distillrank {

struct GenConfig {
    int n_queries = 1;  // >= 1
    int min_terms = 3;  // >= 1
    int max_terms = 8;  // >= min_terms
    std::uint64_t seed = 0;
};

void validate(const GenConfig& cfg);

/// Prompt for the LLM generation mode. template_text must contain the
/// {document} placeholder exactly once; few-shot examples are rendered with
/// the same template, followed by their query.
struct PromptTemplate {
    std::string template_text;
    std::vector<std::pair<std::string, std::string>> few_shot_examples;  // (document, query)

    void validate() const;
    std::string render(std::string_view document) const;
};

/// Produces a synthetic query for a document, or nullopt when the document
/// should be skipped (empty LLM generation).
class QueryGenerator {
  public:
    virtual ~QueryGenerator() = default;
    virtual std::optional<Query> generate(const Document& doc, std::uint64_t draw_index) = 0;
};

/// Deterministic offline generator: the query is the document's top-m terms
/// by tf-idf (corpus idf from the index, ties broken lexicographically), with
/// m drawn from [min_terms, max_terms] by (seed, draw_index). Query ids are
/// "syn-<draw_index>".
Query extractive_generate(const Document& doc, const InvertedIndex& corpus_stats,
                          const GenConfig& cfg, std::uint64_t draw_index);

class ExtractiveGenerator : public QueryGenerator {
  public:
    ExtractiveGenerator(const InvertedIndex* corpus_stats, GenConfig cfg);

    std::optional<Query> generate(const Document& doc, std::uint64_t draw_index) override;

  private:
    const InvertedIndex* stats_;
    GenConfig cfg_;
};

/// Wire protocol: POST /generate with {"prompt": str} returns {"text": str};
/// the first non-empty output line becomes the query text.
struct LlmClientConfig {
    std::string endpoint_url;
    int retries = 2;
    int timeout_ms = 30000;
};

class LlmGenerator : public QueryGenerator {
  public:
    LlmGenerator(LlmClientConfig cfg, PromptTemplate prompt);
    ~LlmGenerator() override;

    std::optional<Query> generate(const Document& doc, std::uint64_t draw_index) override;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// A synthetic query paired with the document it was generated from (its
/// positive).
struct SyntheticPair {
    Query query;
    std::string positive_doc_id;

    bool operator==(const SyntheticPair&) const = default;
};

/// Samples cfg.n_queries documents (without replacement when possible, with
/// replacement otherwise), generates one query per document, and pairs each
/// query with its source document. Skipped documents are dropped.
std::vector<SyntheticPair> build_synthetic_pairs(std::span<const Document> corpus,
                                                 QueryGenerator& generator, const GenConfig& cfg);

/// Sidecar JSONL mapping query_id -> positive doc_id:
/// {"query_id": str, "doc_id": str}.
struct QueryDocPair {
    std::string query_id;
    std::string doc_id;

    bool operator==(const QueryDocPair&) const = default;
};

void write_pairs(const std::filesystem::path& path, std::span<const QueryDocPair> pairs);
std::vector<QueryDocPair> read_pairs(const std::filesystem::path& path);

}  // namespace distillrank
