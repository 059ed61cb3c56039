#include "distillrank/student.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "distillrank/error.hpp"
#include "distillrank/rng.hpp"

namespace distillrank {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr std::uint32_t kDenseSlots = 2;
constexpr double kDocLenNorm = 64.0;

std::uint64_t hash_term(std::uint64_t seed, char ns, std::string_view term) {
    std::string key;
    key.reserve(term.size() + 1);
    key.push_back(ns);
    key.append(term);
    return mix_seed(seed, fnv1a64(key));
}

}  // namespace

void validate(const FeatureConfig& cfg) {
    if (cfg.dim < 16) throw ConfigError("feature dim must be >= 16");
    if ((cfg.dim & (cfg.dim - 1)) != 0) throw ConfigError("feature dim must be a power of two");
}

SparseFeatures featurize(const FeatureConfig& cfg, std::string_view query_text,
                         std::string_view doc_text) {
    validate(cfg);
    const auto query_terms = tokenize(query_text);
    const auto doc_terms = tokenize(doc_text);

    std::map<std::string, std::uint32_t> doc_tf;
    for (const auto& t : doc_terms) ++doc_tf[t];
    std::unordered_set<std::string> query_set(query_terms.begin(), query_terms.end());

    const std::uint32_t buckets = cfg.dim - kDenseSlots;
    std::map<std::uint32_t, double> acc;  // ordered: output comes out sorted

    auto add = [&](char ns, const std::string& term, double value) {
        const auto idx =
            kDenseSlots + static_cast<std::uint32_t>(hash_term(cfg.hash_seed, ns, term) % buckets);
        acc[idx] += value;
    };

    for (const auto& t : query_terms) add('Q', t, 1.0);
    std::size_t overlap = 0;
    for (const auto& [term, tf] : doc_tf) {
        add('D', term, static_cast<double>(std::min<std::uint32_t>(tf, 3)));
        if (query_set.contains(term)) {
            add('X', term, 1.0);
            ++overlap;
        }
    }

    // dense slots: query-overlap fraction and a bounded doc-length feature
    const double overlap_frac =
        query_set.empty() ? 0.0
                          : static_cast<double>(overlap) / static_cast<double>(query_set.size());
    const double dl = static_cast<double>(doc_terms.size());
    acc[0] += overlap_frac;
    acc[1] += dl / (dl + kDocLenNorm);

    SparseFeatures out;
    out.index.reserve(acc.size());
    out.value.reserve(acc.size());
    for (const auto& [idx, val] : acc) {
        out.index.push_back(idx);
        out.value.push_back(val);
    }
    return out;
}

StudentModel StudentModel::init(const FeatureConfig& cfg, std::uint32_t hidden,
                                std::uint64_t seed) {
    validate(cfg);
    if (hidden < 2) throw ConfigError("student hidden width must be >= 2");
    StudentModel model;
    model.features = cfg;
    model.hidden = hidden;
    const std::size_t n = static_cast<std::size_t>(cfg.dim) * hidden + hidden +
                          2ull * hidden + 2;
    model.params.resize(n);
    Rng rng(seed);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    const std::size_t w2_begin = model.w2_offset();
    for (std::size_t i = 0; i < n; ++i) {
        const double bound = i < w2_begin ? bound1 : bound2;
        model.params[i] = rng.uniform(-bound, bound);
    }
    return model;
}

std::string StudentModel::checksum() const {
    return to_hex(fnv1a64(params.data(), params.size() * sizeof(double)));
}

void StudentModel::save(const std::filesystem::path& path) const {
    nlohmann::ordered_json j;
    j["format"] = "distillrank.student";
    j["version"] = kCheckpointVersion;
    j["feature_dim"] = features.dim;
    j["hash_seed"] = features.hash_seed;
    j["hidden"] = hidden;
    j["params"] = params;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump() << '\n';
}

StudentModel StudentModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("format", "") != "distillrank.student")
        throw ParseError(path.string() + ": not a student checkpoint");
    if (j.value("version", 0) != kCheckpointVersion)
        throw ParseError(path.string() + ": unsupported checkpoint version");
    StudentModel model;
    model.features.dim = j.at("feature_dim").get<std::uint32_t>();
    model.features.hash_seed = j.at("hash_seed").get<std::uint64_t>();
    model.hidden = j.at("hidden").get<std::uint32_t>();
    model.params = j.at("params").get<std::vector<double>>();
    validate(model.features);
    const std::size_t expect = static_cast<std::size_t>(model.features.dim) * model.hidden +
                               model.hidden + 2ull * model.hidden + 2;
    if (model.params.size() != expect)
        throw ParseError(path.string() + ": parameter count mismatch");
    for (double p : model.params)
        if (!std::isfinite(p)) throw ParseError(path.string() + ": non-finite parameter");
    return model;
}

Activations forward_full(const StudentModel& model, const SparseFeatures& x) {
    const std::uint32_t hidden = model.hidden;
    Activations acts;
    acts.pre.assign(model.params.begin() + static_cast<std::ptrdiff_t>(model.b1_offset()),
                    model.params.begin() + static_cast<std::ptrdiff_t>(model.b1_offset() + hidden));
    const double* w1 = model.params.data() + model.w1_offset();
    for (std::size_t k = 0; k < x.index.size(); ++k) {
        if (x.index[k] >= model.features.dim)
            throw ConfigError("feature index out of range for this model");
        const double* col = w1 + static_cast<std::size_t>(x.index[k]) * hidden;
        const double v = x.value[k];
        for (std::uint32_t i = 0; i < hidden; ++i) acts.pre[i] += v * col[i];
    }
    acts.post.resize(hidden);
    for (std::uint32_t i = 0; i < hidden; ++i) acts.post[i] = acts.pre[i] > 0.0 ? acts.pre[i] : 0.0;
    const double* w2 = model.params.data() + model.w2_offset();
    const double* b2 = model.params.data() + model.b2_offset();
    double y0 = b2[0];
    double y1 = b2[1];
    for (std::uint32_t i = 0; i < hidden; ++i) {
        y0 += w2[i] * acts.post[i];
        y1 += w2[hidden + i] * acts.post[i];
    }
    acts.logits = {y0, y1};
    return acts;
}

LogitPair forward(const StudentModel& model, const SparseFeatures& x) {
    return forward_full(model, x).logits;
}

void backward_accumulate(const StudentModel& model, const SparseFeatures& x,
                         const Activations& acts, double g_true, double g_false,
                         std::span<double> grad_out) {
    if (grad_out.size() != model.params.size())
        throw ConfigError("gradient buffer size mismatch");
    const std::uint32_t hidden = model.hidden;
    const double* w2 = model.params.data() + model.w2_offset();
    double* gw2 = grad_out.data() + model.w2_offset();
    double* gb2 = grad_out.data() + model.b2_offset();
    gb2[0] += g_true;
    gb2[1] += g_false;

    // d loss / d pre-activation, through relu (derivative 0 at 0)
    std::vector<double> g_pre(hidden);
    for (std::uint32_t i = 0; i < hidden; ++i) {
        gw2[i] += g_true * acts.post[i];
        gw2[hidden + i] += g_false * acts.post[i];
        const double gh = g_true * w2[i] + g_false * w2[hidden + i];
        g_pre[i] = acts.pre[i] > 0.0 ? gh : 0.0;
    }

    double* gb1 = grad_out.data() + model.b1_offset();
    for (std::uint32_t i = 0; i < hidden; ++i) gb1[i] += g_pre[i];
    double* gw1 = grad_out.data() + model.w1_offset();
    for (std::size_t k = 0; k < x.index.size(); ++k) {
        double* col = gw1 + static_cast<std::size_t>(x.index[k]) * hidden;
        const double v = x.value[k];
        for (std::uint32_t i = 0; i < hidden; ++i) col[i] += v * g_pre[i];
    }
}

std::vector<double> backward(const StudentModel& model, const SparseFeatures& x,
                             const Activations& acts, double g_true, double g_false) {
    std::vector<double> grads(model.params.size(), 0.0);
    backward_accumulate(model, x, acts, g_true, g_false, grads);
    return grads;
}

void adamw_step(AdamWState& state, std::span<double> params, std::span<const double> grads,
                const TrainConfig& cfg) {
    if (params.size() != grads.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw ConfigError("adamw buffers disagree in size");
    state.step += 1;
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg.adam_eps)) +
                     cfg.learning_rate * cfg.weight_decay * params[i];
    }
}

TrainReport train(StudentModel& model, std::span<const Triple> triples, const TrainConfig& cfg) {
    if (triples.empty()) throw ConfigError("training requires at least one triple");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(cfg.learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");

    const bool want_soft = is_soft_loss(cfg.loss);
    for (std::size_t i = 0; i < triples.size(); ++i) {
        if (triples[i].is_soft() != want_soft)
            throw ConfigError("triple " + std::to_string(i) + " has a " +
                              (triples[i].is_soft() ? "soft" : "hard") + " label but loss " +
                              std::string(to_string(cfg.loss)) + " expects " +
                              (want_soft ? "soft" : "hard") + " labels");
    }

    // features are reused across epochs
    std::vector<SparseFeatures> features;
    features.reserve(triples.size());
    for (const auto& t : triples)
        features.push_back(featurize(model.features, t.query_text, t.doc_text));

    const std::size_t n = triples.size();
    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    AdamWState state = AdamWState::zeros(model.params.size());
    std::vector<double> grads(model.params.size(), 0.0);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    TrainReport report;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double epoch_loss_sum = 0.0;
        for (std::size_t begin = 0; begin < n; begin += batch_size) {
            const std::size_t len = std::min(batch_size, n - begin);
            std::fill(grads.begin(), grads.end(), 0.0);
            double batch_sum = 0.0;
            for (std::size_t k = 0; k < len; ++k) {
                const std::size_t idx = order[begin + k];
                const auto acts = forward_full(model, features[idx]);
                const LossTarget target =
                    triples[idx].is_soft() ? LossTarget(triples[idx].soft())
                                           : LossTarget(triples[idx].relevant());
                const auto lv = eval_loss(cfg.loss, acts.logits, target);
                if (!std::isfinite(lv.value))
                    throw Error("non-finite loss at step " + std::to_string(report.steps));
                batch_sum += lv.value;
                backward_accumulate(model, features[idx], acts, lv.d_true, lv.d_false, grads);
            }
            // batch-mean gradient
            const double inv = 1.0 / static_cast<double>(len);
            for (auto& g : grads) g *= inv;
            adamw_step(state, model.params, grads, cfg);
            report.steps += 1;
            epoch_loss_sum += batch_sum;
        }
        report.epoch_mean_loss.push_back(epoch_loss_sum / static_cast<double>(n));
    }
    report.final_checksum = model.checksum();
    return report;
}

double rank_score(const StudentModel& model, std::string_view query_text,
                  std::string_view doc_text) {
    const auto logits = forward(model, featurize(model.features, query_text, doc_text));
    return logits.l_true - logits.l_false;
}

StudentTeacher::StudentTeacher(StudentModel model) : model_(std::move(model)) {
    id_ = "student:" + model_.checksum();
}

std::vector<LogitPair> StudentTeacher::score_batch(std::span<const ScoreRequest> batch) {
    if (batch.empty()) throw ConfigError("teacher batch must be non-empty");
    std::vector<LogitPair> out;
    out.reserve(batch.size());
    for (const auto& req : batch)
        out.push_back(forward(model_, featurize(model_.features, req.query_text, req.doc_text)));
    return out;
}

}  // namespace distillrank
