#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "distillrank/bm25.hpp"
#include "distillrank/types.hpp"

namespace distillrank {

/// One scoring request. Teachers score the texts; ids key the logit cache.
struct ScoreRequest {
    std::string query_id;
    std::string doc_id;
    std::string query_text;
    std::string doc_text;
};

struct ScoredPair {
    std::string query_id;
    std::string doc_id;
    LogitPair logits;
    std::string teacher_id;
};

/// Produces one finite LogitPair per request, order preserved.
class Teacher {
  public:
    virtual ~Teacher() = default;
    virtual std::string id() const = 0;
    virtual std::vector<LogitPair> score_batch(std::span<const ScoreRequest> batch) = 0;
};

std::vector<ScoredPair> teacher_score_all(Teacher& teacher, std::span<const ScoreRequest> batch);

/// Deterministic relevance oracle standing in for a large reranker. The
/// margin is weight_overlap * jaccard(query terms, doc terms)
/// + weight_bm25 * s/(1+s) with s the BM25 score of the text, + bias; logits
/// are (scale*m, -scale*m), an antisymmetric pair, so zero-mean normalization
/// leaves them unchanged.
struct PlantedTeacherParams {
    double weight_overlap = 4.0;
    double weight_bm25 = 2.0;
    double bias = -1.0;
    double scale = 2.0;  // > 0
};

LogitPair planted_teacher_logits(const PlantedTeacherParams& params, std::string_view query_text,
                                 std::string_view doc_text, const InvertedIndex& index,
                                 const Bm25Params& bm25 = {});

class PlantedTeacher : public Teacher {
  public:
    PlantedTeacher(PlantedTeacherParams params, const InvertedIndex* index, Bm25Params bm25 = {});

    std::string id() const override { return id_; }
    std::vector<LogitPair> score_batch(std::span<const ScoreRequest> batch) override;

  private:
    PlantedTeacherParams params_;
    const InvertedIndex* index_;
    Bm25Params bm25_;
    std::string id_;
};

/// HTTP client for a remote scorer. Wire protocol: POST /score with
/// {"pairs":[{"query": str, "text": str}, ...]} returns
/// {"logits":[{"true": num, "false": num}, ...]} of equal length.
struct RemoteTeacherConfig {
    std::string endpoint_url;  // e.g. "http://127.0.0.1:8080"
    int batch_size = 32;       // >= 1
    int max_in_flight = 4;     // >= 1
    int retries = 2;           // >= 0, attempts = retries + 1
    int timeout_ms = 30000;
    std::string id;  // cache identity; defaults to "remote:" + endpoint_url
};

class RemoteTeacher : public Teacher {
  public:
    explicit RemoteTeacher(RemoteTeacherConfig cfg);
    ~RemoteTeacher() override;

    std::string id() const override;
    std::vector<LogitPair> score_batch(std::span<const ScoreRequest> batch) override;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Append-only JSONL store of teacher logits keyed by
/// (teacher_id, query_id, doc_id). Later lines win on reload; corrupt lines
/// are skipped and counted. Writes are serialized.
class LogitCache {
  public:
    explicit LogitCache(std::filesystem::path path);

    std::optional<LogitPair> get(std::string_view teacher_id, std::string_view query_id,
                                 std::string_view doc_id) const;
    void put(std::string_view teacher_id, std::string_view query_id, std::string_view doc_id,
             const LogitPair& logits);

    std::size_t size() const;
    std::size_t corrupt_lines_skipped() const { return corrupt_lines_; }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
    std::unordered_map<std::string, LogitPair> entries_;
    std::size_t corrupt_lines_ = 0;
    mutable std::mutex mutex_;
};

/// Serves cache hits and forwards only the misses to the inner teacher,
/// storing fresh logits back. Scoring results are identical with a cold or
/// warm cache.
class CachedTeacher : public Teacher {
  public:
    CachedTeacher(Teacher& inner, LogitCache& cache) : inner_(&inner), cache_(&cache) {}

    std::string id() const override { return inner_->id(); }
    std::vector<LogitPair> score_batch(std::span<const ScoreRequest> batch) override;

  private:
    Teacher* inner_;
    LogitCache* cache_;
};

}  // namespace distillrank
