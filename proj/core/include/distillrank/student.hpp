#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distillrank/losses.hpp"
#include "distillrank/teacher.hpp"
#include "distillrank/types.hpp"

namespace distillrank {

/// Hashed text-feature space. dim must be a power of two and >= 16; indices
/// 0 and 1 are dense slots (query-term overlap fraction, normalized doc
/// length), hashed unigram/overlap features occupy [2, dim).
struct FeatureConfig {
    std::uint32_t dim = 4096;
    std::uint64_t hash_seed = 0x5eedf00dULL;

    bool operator==(const FeatureConfig&) const = default;
};

void validate(const FeatureConfig& cfg);

/// Sorted sparse vector; indices unique.
struct SparseFeatures {
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    bool operator==(const SparseFeatures&) const = default;
};

/// Hashed unigrams of the query (namespace Q), of the document (namespace D,
/// tf capped at 3), their overlapping terms (namespace X), plus the two dense
/// slots. Deterministic.
SparseFeatures featurize(const FeatureConfig& cfg, std::string_view query_text,
                         std::string_view doc_text);

/// Two-layer scorer: logits = W2 * relu(W1 * x + b1) + b2, with two output
/// logits (Y_true, Y_false). Parameters live in one flat buffer
/// [W1 | b1 | W2 | b2]; W1 is stored feature-major so sparse inputs touch
/// contiguous slabs.
struct StudentModel {
    FeatureConfig features;
    std::uint32_t hidden = 32;  // >= 2
    std::vector<double> params;

    static StudentModel init(const FeatureConfig& cfg, std::uint32_t hidden,
                             std::uint64_t seed);

    std::size_t param_count() const { return params.size(); }
    std::size_t w1_offset() const { return 0; }
    std::size_t b1_offset() const { return static_cast<std::size_t>(features.dim) * hidden; }
    std::size_t w2_offset() const { return b1_offset() + hidden; }
    std::size_t b2_offset() const { return w2_offset() + 2ull * hidden; }

    /// FNV-1a over the raw parameter bytes; equal iff bit-identical.
    std::string checksum() const;

    /// Versioned JSON checkpoint; load(save(m)) reproduces identical scores.
    void save(const std::filesystem::path& path) const;
    static StudentModel load(const std::filesystem::path& path);

    bool operator==(const StudentModel&) const = default;
};

struct Activations {
    std::vector<double> pre;   // W1*x + b1
    std::vector<double> post;  // relu(pre)
    LogitPair logits;
};

LogitPair forward(const StudentModel& model, const SparseFeatures& x);
Activations forward_full(const StudentModel& model, const SparseFeatures& x);

/// Reverse-mode gradients of the forward expression, accumulated into
/// grad_out (same layout as model.params). upstream is d(loss)/d(logits).
void backward_accumulate(const StudentModel& model, const SparseFeatures& x,
                         const Activations& acts, double g_true, double g_false,
                         std::span<double> grad_out);

/// Convenience wrapper returning a fresh gradient buffer.
std::vector<double> backward(const StudentModel& model, const SparseFeatures& x,
                             const Activations& acts, double g_true, double g_false);

struct TrainConfig {
    double learning_rate = 7e-5;  // > 0 (0 allowed: no-op updates)
    int batch_size = 32;          // >= 1
    int epochs = 10;              // >= 1
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::mse_normalized;
};

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    static AdamWState zeros(std::size_t n) { return {std::vector<double>(n, 0.0),
                                                     std::vector<double>(n, 0.0), 0}; }
};

/// Decoupled weight decay: p -= lr * m_hat / (sqrt(v_hat) + eps)
///                          + lr * weight_decay * p, with bias-corrected
/// moments.
void adamw_step(AdamWState& state, std::span<double> params, std::span<const double> grads,
                const TrainConfig& cfg);

struct TrainReport {
    std::vector<double> epoch_mean_loss;
    std::int64_t steps = 0;
    std::string final_checksum;
};

/// Mini-batch training with a per-epoch shuffle seeded by (cfg.seed, epoch).
/// Deterministic end to end for fixed inputs and config. Throws before the
/// first step if any triple's label kind does not match cfg.loss.
TrainReport train(StudentModel& model, std::span<const Triple> triples, const TrainConfig& cfg);

/// Ranking score Y_true - Y_false: strictly monotone in softmax P_true.
double rank_score(const StudentModel& model, std::string_view query_text,
                  std::string_view doc_text);

/// Adapts a student checkpoint to the Teacher interface, which makes
/// self-distillation a regular pipeline configuration.
class StudentTeacher : public Teacher {
  public:
    explicit StudentTeacher(StudentModel model);

    std::string id() const override { return id_; }
    std::vector<LogitPair> score_batch(std::span<const ScoreRequest> batch) override;

  private:
    StudentModel model_;
    std::string id_;
};

}  // namespace distillrank
