#pragma once

#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "distillrank/types.hpp"

namespace distillrank {

/// Training objectives. The soft variants regress the zero-mean-normalized
/// teacher logits; ce_hard is plain cross-entropy on binary labels.
enum class LossKind { mse_normalized, mse_true_only, kl_divergence, ce_hard };

std::string_view to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

constexpr bool is_soft_loss(LossKind kind) { return kind != LossKind::ce_hard; }

/// Loss value plus its gradient with respect to the student logits
/// (Y_true, Y_false). The teacher side never receives a gradient.
struct LossValueAndGrad {
    double value = 0.0;
    double d_true = 0.0;
    double d_false = 0.0;

    bool operator==(const LossValueAndGrad&) const = default;
};

/// Zero-mean normalization: subtracts the pair mean from both logits, so
/// l'_true = -l'_false = (l_true - l_false) / 2. Idempotent.
NormalizedLogitPair normalize_logits(const LogitPair& teacher);

/// (Y_true - L'_true)^2 + (Y_false - L'_false)^2 over normalized teacher
/// logits. No 1/2 factor and no internal averaging; batch averaging is a
/// separate step.
LossValueAndGrad mse_loss(const LogitPair& student, const LogitPair& teacher);

/// MSE restricted to the true logit: (Y_true - L'_true)^2.
LossValueAndGrad mse_true_only_loss(const LogitPair& student, const LogitPair& teacher);

/// KL(teacher || student) over the two-class softmax of each pair; teacher
/// logits are normalized first.
LossValueAndGrad kl_loss(const LogitPair& student, const LogitPair& teacher);

/// Negative log-likelihood of the correct class under softmax(student),
/// computed with a log-sum-exp.
LossValueAndGrad ce_hard_loss(const LogitPair& student, bool relevant);

/// Soft target (teacher logits) or hard target (relevance).
using LossTarget = std::variant<LogitPair, bool>;

/// Dispatches to the loss above; rejects soft targets with ce_hard and hard
/// targets with the soft losses.
LossValueAndGrad eval_loss(LossKind kind, const LogitPair& student, const LossTarget& target);

struct BatchLossResult {
    std::vector<LossValueAndGrad> items;  // per-example grads, unscaled
    double mean_value = 0.0;
};

/// Per-example losses plus the batch-mean value. Per-example grads are left
/// unscaled; the optimizer step applies the 1/batch factor.
BatchLossResult batch_loss(LossKind kind,
                           std::span<const std::pair<LogitPair, LossTarget>> batch);

}  // namespace distillrank
