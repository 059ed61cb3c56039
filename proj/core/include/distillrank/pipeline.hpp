#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distillrank/bm25.hpp"
#include "distillrank/querygen.hpp"
#include "distillrank/student.hpp"
#include "distillrank/teacher.hpp"
#include "distillrank/types.hpp"

namespace distillrank {

/// Teacher selection for a phase: the planted oracle, a remote scorer, or a
/// student checkpoint (self-distillation).
struct TeacherConfig {
    enum class Kind { planted, remote, student };
    Kind kind = Kind::planted;
    PlantedTeacherParams planted;
    RemoteTeacherConfig remote;
    std::filesystem::path student_checkpoint;
};

/// Instantiates the configured teacher. The index is required for the
/// planted kind. When cache is non-null the teacher is wrapped so repeat
/// pairs are served from it.
std::unique_ptr<Teacher> make_teacher(const TeacherConfig& cfg, const InvertedIndex* index,
                                      const Bm25Params& bm25, LogitCache* cache = nullptr);

struct TripleBuildStats {
    std::size_t queries_total = 0;
    std::size_t queries_skipped_no_positive = 0;
    std::size_t queries_skipped_empty_pool = 0;
    std::size_t positives_missing_from_corpus = 0;
    std::size_t triples = 0;
};

struct TripleBuildResult {
    std::vector<Triple> triples;
    TripleBuildStats stats;
};

/// Phase-1 construction: per query, the human-annotated positives
/// (grade > 0) plus BM25-sampled negatives, all scored by the teacher into
/// soft triples. Queries without positives or with an empty negative pool
/// are skipped and counted.
TripleBuildResult build_phase1_triples(std::span<const Document> corpus,
                                       std::span<const Query> queries,
                                       std::span<const Qrel> qrels, const InvertedIndex& index,
                                       const Bm25Params& bm25, Teacher& teacher,
                                       const SamplerConfig& sampler);

/// Phase-2 construction: synthetic (query, source document) pairs, the
/// source document as the sole positive, negatives sampled as in phase 1,
/// teacher-scored soft labels.
TripleBuildResult build_phase2_triples(std::span<const Document> corpus,
                                       std::span<const SyntheticPair> pairs,
                                       const InvertedIndex& index, const Bm25Params& bm25,
                                       Teacher& teacher, const SamplerConfig& sampler);

/// Hard-label construction: positives (any grade > 0) become true, sampled
/// negatives false. No teacher involved.
TripleBuildResult build_hard_triples(std::span<const Document> corpus,
                                     std::span<const Query> queries, std::span<const Qrel> qrels,
                                     const InvertedIndex& index, const Bm25Params& bm25,
                                     const SamplerConfig& sampler);

enum class PhaseKind { phase1_human_soft, phase2_synthetic_soft, human_hard, real_query_soft };

std::string_view to_string(PhaseKind kind);
PhaseKind phase_kind_from_string(std::string_view name);

struct PhaseSpec {
    PhaseKind name = PhaseKind::phase1_human_soft;
    std::filesystem::path corpus;
    std::filesystem::path queries;  // phase2: pregenerated synthetic queries (with pairs)
    std::filesystem::path qrels;    // required for the qrel-driven phases
    std::filesystem::path pairs;    // phase2 sidecar when queries are pregenerated
    std::optional<GenConfig> generator;  // phase2 alternative to queries+pairs
    TeacherConfig teacher;
    Bm25Params bm25;
    SamplerConfig sampler;
    TrainConfig train;
};

struct StudentSpec {
    FeatureConfig features;
    std::uint32_t hidden = 32;
    std::uint64_t init_seed = 0;
    std::filesystem::path init_checkpoint;  // resume instead of fresh init
};

/// Experiment manifest, a single JSON document. Omitted per-phase seeds are
/// derived from (global seed, phase index, role), so a phase's position
/// matters unless seeds are pinned explicitly.
struct ExperimentManifest {
    std::vector<PhaseSpec> phases;  // at least one
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    StudentSpec student;

    static ExperimentManifest load(const std::filesystem::path& path);
    void validate() const;
};

/// Fingerprint of the resolved configuration plus digests of every input
/// file. Identical hash => identical outputs.
std::string manifest_config_hash(const ExperimentManifest& manifest);

struct PhaseArtifacts {
    PhaseKind kind;
    std::filesystem::path dir;
    std::filesystem::path triples_file;
    std::filesystem::path checkpoint;
    std::filesystem::path report_file;
    TripleBuildStats stats;
    TrainReport train_report;
};

struct ExperimentResult {
    std::string config_hash;
    std::filesystem::path out_dir;  // output_dir / config_hash
    std::vector<PhaseArtifacts> phases;
    std::filesystem::path final_checkpoint;
};

struct RunOptions {
    std::optional<std::filesystem::path> cache_path;  // teacher logit cache
    int threads = 1;
};

/// Executes the phases in order, each training on top of the previous
/// checkpoint, writing out/<hash>/phaseN/{triples.jsonl, model.ckpt,
/// report.json}. Reruns of an identical manifest rebuild byte-identical
/// artifacts. On failure, partial outputs stay on disk next to an ABORTED
/// marker describing the failing phase.
ExperimentResult run_experiment(const ExperimentManifest& manifest, const RunOptions& = {});

}  // namespace distillrank
