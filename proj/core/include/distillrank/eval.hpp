#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distillrank/student.hpp"
#include "distillrank/types.hpp"

namespace distillrank {

/// Candidate passage for reranking.
struct RerankCandidate {
    std::string doc_id;
    std::string doc_text;
};

using ScoreFn =
    std::function<double(const Query& query, const RerankCandidate& candidate)>;

/// Scores every candidate, sorts by (score desc, doc_id asc) and emits the
/// top k as ranks 1..k.
std::vector<RunEntry> rerank(const ScoreFn& scorer, const Query& query,
                             std::span<const RerankCandidate> candidates, std::size_t k,
                             std::string_view tag);

std::vector<RunEntry> rerank(const StudentModel& model, const Query& query,
                             std::span<const RerankCandidate> candidates, std::size_t k,
                             std::string_view tag);

/// Graded nDCG with gain 2^grade - 1 and discount log2(rank + 1); IDCG from
/// the qrels sorted by grade descending. Returns nullopt for queries without
/// any grade > 0 qrel (excluded from averages).
std::optional<double> ndcg_at_k(std::span<const std::string> ranked_doc_ids,
                                std::span<const Qrel> query_qrels, int k = 10);

struct RunEvaluation {
    double mean_ndcg = 0.0;  // over defined queries
    std::map<std::string, double> per_query;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  // undefined or missing from qrels
};

RunEvaluation evaluate_run(std::span<const RunEntry> run, std::span<const Qrel> qrels,
                           int k = 10);

/// Everything needed to evaluate one dataset: corpus for candidate texts,
/// queries, graded judgments and a first-stage candidate list per query.
struct DatasetBundle {
    std::vector<Document> corpus;
    std::vector<Query> queries;
    std::vector<Qrel> qrels;
    std::map<std::string, std::vector<std::string>> candidates;  // query_id -> doc ids
};

struct SplitSpec {
    std::string name;
    std::vector<std::string> datasets;  // unique
    bool in_domain = false;
};

struct DatasetEval {
    double ndcg = 0.0;
    std::size_t queries_evaluated = 0;
    std::size_t queries_skipped = 0;
};

struct EvalReport {
    std::map<std::string, DatasetEval> per_dataset;
    std::map<std::string, double> split_means;  // unweighted mean over member datasets
    int k = 10;
};

/// Reranks and scores every dataset, then averages per split. Evaluation may
/// fan out over threads; aggregation order is fixed.
EvalReport evaluate_splits(const StudentModel& model,
                           const std::map<std::string, DatasetBundle>& datasets,
                           std::span<const SplitSpec> splits, int k = 10, int threads = 1);

void write_report(const std::filesystem::path& path, const EvalReport& report);
EvalReport read_report(const std::filesystem::path& path);

/// Plain-text table: dataset rows with their split and score, then split
/// means.
std::string render_report_table(const EvalReport& report);

/// CSV with dataset rows and one score column per named configuration,
/// mirroring ablation-table layout.
std::string render_comparison_csv(
    std::span<const std::pair<std::string, EvalReport>> named_reports);

}  // namespace distillrank
