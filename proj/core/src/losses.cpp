#include "distillrank/losses.hpp"

#include <cmath>

#include "distillrank/error.hpp"

namespace distillrank {

namespace {

void require_finite(const LogitPair& p, const char* who) {
    if (!p.finite()) throw ConfigError(std::string("non-finite ") + who + " logits");
}

struct Softmax {
    double p_true;
    double p_false;
    double log_p_true;
    double log_p_false;
};

/// Two-class softmax via log-sum-exp with max shift.
Softmax softmax2(double l_true, double l_false) {
    const double m = l_true > l_false ? l_true : l_false;
    const double lse = m + std::log(std::exp(l_true - m) + std::exp(l_false - m));
    Softmax s;
    s.log_p_true = l_true - lse;
    s.log_p_false = l_false - lse;
    s.p_true = std::exp(s.log_p_true);
    s.p_false = std::exp(s.log_p_false);
    return s;
}

}  // namespace

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::mse_normalized: return "mse_normalized";
        case LossKind::mse_true_only: return "mse_true_only";
        case LossKind::kl_divergence: return "kl_divergence";
        case LossKind::ce_hard: return "ce_hard";
    }
    return "?";
}

LossKind loss_kind_from_string(std::string_view name) {
    if (name == "mse_normalized") return LossKind::mse_normalized;
    if (name == "mse_true_only") return LossKind::mse_true_only;
    if (name == "kl_divergence") return LossKind::kl_divergence;
    if (name == "ce_hard") return LossKind::ce_hard;
    throw ConfigError("unknown loss kind: \"" + std::string(name) + "\"");
}

NormalizedLogitPair normalize_logits(const LogitPair& teacher) {
    require_finite(teacher, "teacher");
    const double mean = (teacher.l_true + teacher.l_false) / 2.0;
    return {teacher.l_true - mean, teacher.l_false - mean};
}

LossValueAndGrad mse_loss(const LogitPair& student, const LogitPair& teacher) {
    require_finite(student, "student");
    const auto t = normalize_logits(teacher);
    const double dt = student.l_true - t.l_true;
    const double df = student.l_false - t.l_false;
    return {dt * dt + df * df, 2.0 * dt, 2.0 * df};
}

LossValueAndGrad mse_true_only_loss(const LogitPair& student, const LogitPair& teacher) {
    require_finite(student, "student");
    const auto t = normalize_logits(teacher);
    const double dt = student.l_true - t.l_true;
    return {dt * dt, 2.0 * dt, 0.0};
}

LossValueAndGrad kl_loss(const LogitPair& student, const LogitPair& teacher) {
    require_finite(student, "student");
    const auto t = normalize_logits(teacher);
    const auto p = softmax2(t.l_true, t.l_false);
    const auto q = softmax2(student.l_true, student.l_false);
    // sum_c p_c (log p_c - log q_c); never negative by Gibbs' inequality
    double value = p.p_true * (p.log_p_true - q.log_p_true) +
                   p.p_false * (p.log_p_false - q.log_p_false);
    if (value < 0.0) value = 0.0;  // clamp FP residue around the minimum
    return {value, q.p_true - p.p_true, q.p_false - p.p_false};
}

LossValueAndGrad ce_hard_loss(const LogitPair& student, bool relevant) {
    require_finite(student, "student");
    const auto q = softmax2(student.l_true, student.l_false);
    if (relevant) return {-q.log_p_true, q.p_true - 1.0, q.p_false};
    return {-q.log_p_false, q.p_true, q.p_false - 1.0};
}

LossValueAndGrad eval_loss(LossKind kind, const LogitPair& student, const LossTarget& target) {
    if (kind == LossKind::ce_hard) {
        if (!std::holds_alternative<bool>(target))
            throw ConfigError("ce_hard requires hard targets");
        return ce_hard_loss(student, std::get<bool>(target));
    }
    if (!std::holds_alternative<LogitPair>(target))
        throw ConfigError(std::string(to_string(kind)) + " requires soft targets");
    const auto& teacher = std::get<LogitPair>(target);
    switch (kind) {
        case LossKind::mse_normalized: return mse_loss(student, teacher);
        case LossKind::mse_true_only: return mse_true_only_loss(student, teacher);
        case LossKind::kl_divergence: return kl_loss(student, teacher);
        case LossKind::ce_hard: break;
    }
    throw ConfigError("unreachable loss kind");
}

BatchLossResult batch_loss(LossKind kind,
                           std::span<const std::pair<LogitPair, LossTarget>> batch) {
    if (batch.empty()) throw ConfigError("batch_loss requires a non-empty batch");
    BatchLossResult result;
    result.items.reserve(batch.size());
    double sum = 0.0;
    for (const auto& [student, target] : batch) {
        result.items.push_back(eval_loss(kind, student, target));
        sum += result.items.back().value;
    }
    result.mean_value = sum / static_cast<double>(batch.size());
    return result;
}

}  // namespace distillrank
