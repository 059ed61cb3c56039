#include "distillrank/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "distillrank/corpus_io.hpp"
#include "distillrank/error.hpp"
#include "distillrank/rng.hpp"
#include "distillrank/text.hpp"

namespace distillrank {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::unordered_map<std::string, const Document*> doc_map(std::span<const Document> corpus) {
    std::unordered_map<std::string, const Document*> map;
    map.reserve(corpus.size());
    for (const auto& d : corpus) map.emplace(d.id, &d);
    return map;
}

/// Scores the (positive ids, negative ids) layout of one query into triples.
void emit_soft_triples(const Query& query,
                       const std::vector<const Document*>& positives,
                       const std::vector<const Document*>& negatives, Teacher& teacher,
                       std::vector<Triple>& out) {
    std::vector<ScoreRequest> requests;
    requests.reserve(positives.size() + negatives.size());
    auto add = [&](const Document* doc) {
        requests.push_back({query.id, doc->id, query.text, passage_text(*doc)});
    };
    for (const auto* doc : positives) add(doc);
    for (const auto* doc : negatives) add(doc);
    const auto logits = teacher.score_batch(requests);
    for (std::size_t i = 0; i < requests.size(); ++i)
        out.push_back({requests[i].query_id, requests[i].query_text, requests[i].doc_id,
                       requests[i].doc_text, logits[i]});
}

}  // namespace

std::unique_ptr<Teacher> make_teacher(const TeacherConfig& cfg, const InvertedIndex* index,
                                      const Bm25Params& bm25, LogitCache* cache) {
    std::unique_ptr<Teacher> teacher;
    switch (cfg.kind) {
        case TeacherConfig::Kind::planted:
            teacher = std::make_unique<PlantedTeacher>(cfg.planted, index, bm25);
            break;
        case TeacherConfig::Kind::remote:
            teacher = std::make_unique<RemoteTeacher>(cfg.remote);
            break;
        case TeacherConfig::Kind::student:
            teacher = std::make_unique<StudentTeacher>(StudentModel::load(cfg.student_checkpoint));
            break;
    }
    if (cache == nullptr) return teacher;
    // keep the inner teacher alive behind the cache wrapper
    struct Owning : Teacher {
        std::unique_ptr<Teacher> inner;
        LogitCache* cache;
        Owning(std::unique_ptr<Teacher> t, LogitCache* c) : inner(std::move(t)), cache(c) {}
        std::string id() const override { return inner->id(); }
        std::vector<LogitPair> score_batch(std::span<const ScoreRequest> batch) override {
            CachedTeacher wrapper(*inner, *cache);
            return wrapper.score_batch(batch);
        }
    };
    return std::make_unique<Owning>(std::move(teacher), cache);
}

TripleBuildResult build_phase1_triples(std::span<const Document> corpus,
                                       std::span<const Query> queries,
                                       std::span<const Qrel> qrels, const InvertedIndex& index,
                                       const Bm25Params& bm25, Teacher& teacher,
                                       const SamplerConfig& sampler) {
    const auto docs = doc_map(corpus);
    std::unordered_map<std::string, std::vector<const Qrel*>> qrels_by_query;
    for (const auto& q : qrels) qrels_by_query[q.query_id].push_back(&q);

    TripleBuildResult result;
    for (const auto& query : queries) {
        ++result.stats.queries_total;
        std::vector<const Document*> positives;
        std::unordered_set<std::string> positive_ids;
        if (auto it = qrels_by_query.find(query.id); it != qrels_by_query.end()) {
            for (const auto* qrel : it->second) {
                if (qrel->grade <= 0) continue;
                positive_ids.insert(qrel->doc_id);
                auto dit = docs.find(qrel->doc_id);
                if (dit == docs.end()) {
                    ++result.stats.positives_missing_from_corpus;
                    continue;
                }
                positives.push_back(dit->second);
            }
        }
        if (positives.empty()) {
            ++result.stats.queries_skipped_no_positive;
            std::cerr << "warning: query " << query.id << " has no usable positive, skipping\n";
            continue;
        }
        const auto negative_ids =
            sample_negatives(index, bm25, query.id, query.text, positive_ids, sampler);
        if (negative_ids.empty()) {
            ++result.stats.queries_skipped_empty_pool;
            std::cerr << "warning: query " << query.id << " has an empty negative pool, skipping\n";
            continue;
        }
        std::vector<const Document*> negatives;
        negatives.reserve(negative_ids.size());
        for (const auto& id : negative_ids) negatives.push_back(docs.at(id));
        emit_soft_triples(query, positives, negatives, teacher, result.triples);
    }
    result.stats.triples = result.triples.size();
    return result;
}

TripleBuildResult build_phase2_triples(std::span<const Document> corpus,
                                       std::span<const SyntheticPair> pairs,
                                       const InvertedIndex& index, const Bm25Params& bm25,
                                       Teacher& teacher, const SamplerConfig& sampler) {
    const auto docs = doc_map(corpus);
    TripleBuildResult result;
    for (const auto& pair : pairs) {
        ++result.stats.queries_total;
        auto dit = docs.find(pair.positive_doc_id);
        if (dit == docs.end()) {
            ++result.stats.positives_missing_from_corpus;
            ++result.stats.queries_skipped_no_positive;
            continue;
        }
        const auto negative_ids = sample_negatives(index, bm25, pair.query.id, pair.query.text,
                                                   {pair.positive_doc_id}, sampler);
        if (negative_ids.empty()) {
            ++result.stats.queries_skipped_empty_pool;
            continue;
        }
        std::vector<const Document*> negatives;
        negatives.reserve(negative_ids.size());
        for (const auto& id : negative_ids) negatives.push_back(docs.at(id));
        emit_soft_triples(pair.query, {dit->second}, negatives, teacher, result.triples);
    }
    result.stats.triples = result.triples.size();
    return result;
}

TripleBuildResult build_hard_triples(std::span<const Document> corpus,
                                     std::span<const Query> queries, std::span<const Qrel> qrels,
                                     const InvertedIndex& index, const Bm25Params& bm25,
                                     const SamplerConfig& sampler) {
    const auto docs = doc_map(corpus);
    std::unordered_map<std::string, std::vector<const Qrel*>> qrels_by_query;
    for (const auto& q : qrels) qrels_by_query[q.query_id].push_back(&q);

    TripleBuildResult result;
    for (const auto& query : queries) {
        ++result.stats.queries_total;
        std::vector<const Document*> positives;
        std::unordered_set<std::string> positive_ids;
        if (auto it = qrels_by_query.find(query.id); it != qrels_by_query.end()) {
            for (const auto* qrel : it->second) {
                if (qrel->grade <= 0) continue;  // any grade > 0 is relevant
                positive_ids.insert(qrel->doc_id);
                auto dit = docs.find(qrel->doc_id);
                if (dit == docs.end()) {
                    ++result.stats.positives_missing_from_corpus;
                    continue;
                }
                positives.push_back(dit->second);
            }
        }
        if (positives.empty()) {
            ++result.stats.queries_skipped_no_positive;
            continue;
        }
        const auto negative_ids =
            sample_negatives(index, bm25, query.id, query.text, positive_ids, sampler);
        if (negative_ids.empty()) {
            ++result.stats.queries_skipped_empty_pool;
            continue;
        }
        for (const auto* doc : positives)
            result.triples.push_back({query.id, query.text, doc->id, passage_text(*doc), true});
        for (const auto& id : negative_ids) {
            const auto* doc = docs.at(id);
            result.triples.push_back({query.id, query.text, doc->id, passage_text(*doc), false});
        }
    }
    result.stats.triples = result.triples.size();
    return result;
}

std::string_view to_string(PhaseKind kind) {
    switch (kind) {
        case PhaseKind::phase1_human_soft: return "phase1_human_soft";
        case PhaseKind::phase2_synthetic_soft: return "phase2_synthetic_soft";
        case PhaseKind::human_hard: return "human_hard";
        case PhaseKind::real_query_soft: return "real_query_soft";
    }
    return "?";
}

PhaseKind phase_kind_from_string(std::string_view name) {
    if (name == "phase1_human_soft") return PhaseKind::phase1_human_soft;
    if (name == "phase2_synthetic_soft") return PhaseKind::phase2_synthetic_soft;
    if (name == "human_hard") return PhaseKind::human_hard;
    if (name == "real_query_soft") return PhaseKind::real_query_soft;
    throw ConfigError("unknown phase kind: \"" + std::string(name) + "\"");
}

// ---------------------------------------------------------------------------
// Manifest parsing

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

TeacherConfig parse_teacher(const json& j) {
    TeacherConfig cfg;
    const auto kind = j.value("kind", "planted");
    if (kind == "planted") {
        cfg.kind = TeacherConfig::Kind::planted;
        cfg.planted.weight_overlap = j.value("weight_overlap", cfg.planted.weight_overlap);
        cfg.planted.weight_bm25 = j.value("weight_bm25", cfg.planted.weight_bm25);
        cfg.planted.bias = j.value("bias", cfg.planted.bias);
        cfg.planted.scale = j.value("scale", cfg.planted.scale);
    } else if (kind == "remote") {
        cfg.kind = TeacherConfig::Kind::remote;
        cfg.remote.endpoint_url = j.value("endpoint", "");
        cfg.remote.batch_size = j.value("batch_size", cfg.remote.batch_size);
        cfg.remote.max_in_flight = j.value("max_in_flight", cfg.remote.max_in_flight);
        cfg.remote.retries = j.value("retries", cfg.remote.retries);
        cfg.remote.timeout_ms = j.value("timeout_ms", cfg.remote.timeout_ms);
        cfg.remote.id = j.value("id", "");
    } else if (kind == "student") {
        cfg.kind = TeacherConfig::Kind::student;
        cfg.student_checkpoint = j.value("checkpoint", "");
    } else {
        throw ConfigError("unknown teacher kind: \"" + kind + "\"");
    }
    return cfg;
}

ordered_json teacher_to_json(const TeacherConfig& cfg) {
    ordered_json j;
    switch (cfg.kind) {
        case TeacherConfig::Kind::planted:
            j["kind"] = "planted";
            j["weight_overlap"] = cfg.planted.weight_overlap;
            j["weight_bm25"] = cfg.planted.weight_bm25;
            j["bias"] = cfg.planted.bias;
            j["scale"] = cfg.planted.scale;
            break;
        case TeacherConfig::Kind::remote:
            j["kind"] = "remote";
            j["endpoint"] = cfg.remote.endpoint_url;
            j["batch_size"] = cfg.remote.batch_size;
            j["max_in_flight"] = cfg.remote.max_in_flight;
            j["retries"] = cfg.remote.retries;
            j["timeout_ms"] = cfg.remote.timeout_ms;
            if (!cfg.remote.id.empty()) j["id"] = cfg.remote.id;
            break;
        case TeacherConfig::Kind::student:
            j["kind"] = "student";
            j["checkpoint"] = cfg.student_checkpoint.string();
            break;
    }
    return j;
}

}  // namespace

ExperimentManifest ExperimentManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ParseError(path.string() + ": malformed manifest JSON");
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    ExperimentManifest m;
    m.seed = j.value("seed", 0ull);
    m.output_dir = resolve(base, j.value("output_dir", "out"));
    if (j.contains("student")) {
        const auto& s = j["student"];
        m.student.features.dim = s.value("dim", m.student.features.dim);
        m.student.features.hash_seed = s.value("hash_seed", m.student.features.hash_seed);
        m.student.hidden = s.value("hidden", m.student.hidden);
        m.student.init_seed = s.value("init_seed", m.student.init_seed);
        if (s.contains("init_checkpoint"))
            m.student.init_checkpoint = resolve(base, s["init_checkpoint"].get<std::string>());
    }
    Bm25Params global_bm25;
    if (j.contains("bm25")) {
        global_bm25.k1 = j["bm25"].value("k1", global_bm25.k1);
        global_bm25.b = j["bm25"].value("b", global_bm25.b);
    }
    if (!j.contains("phases") || !j["phases"].is_array() || j["phases"].empty())
        throw ConfigError(path.string() + ": manifest needs at least one phase");

    std::size_t phase_index = 0;
    for (const auto& p : j["phases"]) {
        PhaseSpec spec;
        spec.name = phase_kind_from_string(p.value("name", ""));
        if (p.contains("corpus")) spec.corpus = resolve(base, p["corpus"].get<std::string>());
        if (p.contains("queries")) spec.queries = resolve(base, p["queries"].get<std::string>());
        if (p.contains("qrels")) spec.qrels = resolve(base, p["qrels"].get<std::string>());
        if (p.contains("pairs")) spec.pairs = resolve(base, p["pairs"].get<std::string>());
        if (p.contains("generator")) {
            const auto& g = p["generator"];
            GenConfig gen;
            gen.n_queries = g.value("n_queries", gen.n_queries);
            gen.min_terms = g.value("min_terms", gen.min_terms);
            gen.max_terms = g.value("max_terms", gen.max_terms);
            gen.seed = g.contains("seed") ? g["seed"].get<std::uint64_t>()
                                          : mix_seed(m.seed, phase_index * 3 + 0);
            spec.generator = gen;
        }
        if (p.contains("teacher")) spec.teacher = parse_teacher(p["teacher"]);
        spec.bm25 = global_bm25;
        if (p.contains("bm25")) {
            spec.bm25.k1 = p["bm25"].value("k1", spec.bm25.k1);
            spec.bm25.b = p["bm25"].value("b", spec.bm25.b);
        }
        if (p.contains("sampler")) {
            const auto& s = p["sampler"];
            spec.sampler.pool_k = s.value("pool_k", spec.sampler.pool_k);
            spec.sampler.negatives_per_positive =
                s.value("negatives_per_positive", spec.sampler.negatives_per_positive);
            spec.sampler.seed = s.contains("seed") ? s["seed"].get<std::uint64_t>()
                                                   : mix_seed(m.seed, phase_index * 3 + 1);
        } else {
            spec.sampler.seed = mix_seed(m.seed, phase_index * 3 + 1);
        }
        if (p.contains("train")) {
            const auto& t = p["train"];
            spec.train.learning_rate = t.value("learning_rate", spec.train.learning_rate);
            spec.train.batch_size = t.value("batch_size", spec.train.batch_size);
            spec.train.epochs = t.value("epochs", spec.train.epochs);
            spec.train.adam_beta1 = t.value("adam_beta1", spec.train.adam_beta1);
            spec.train.adam_beta2 = t.value("adam_beta2", spec.train.adam_beta2);
            spec.train.adam_eps = t.value("adam_eps", spec.train.adam_eps);
            spec.train.weight_decay = t.value("weight_decay", spec.train.weight_decay);
            spec.train.seed = t.contains("seed") ? t["seed"].get<std::uint64_t>()
                                                 : mix_seed(m.seed, phase_index * 3 + 2);
            if (t.contains("loss"))
                spec.train.loss = loss_kind_from_string(t["loss"].get<std::string>());
        } else {
            spec.train.seed = mix_seed(m.seed, phase_index * 3 + 2);
        }
        if (spec.name == PhaseKind::human_hard) spec.train.loss = LossKind::ce_hard;
        m.phases.push_back(std::move(spec));
        ++phase_index;
    }
    m.validate();
    return m;
}

void ExperimentManifest::validate() const {
    if (phases.empty()) throw ConfigError("manifest needs at least one phase");
    distillrank::validate(student.features);
    for (const auto& p : phases) {
        if (p.corpus.empty())
            throw ConfigError(std::string(to_string(p.name)) + ": corpus path is required");
        const bool qrel_driven = p.name != PhaseKind::phase2_synthetic_soft;
        if (qrel_driven) {
            if (p.queries.empty() || p.qrels.empty())
                throw ConfigError(std::string(to_string(p.name)) +
                                  ": queries and qrels are required");
        } else if (!p.generator && (p.queries.empty() || p.pairs.empty())) {
            throw ConfigError("phase2_synthetic_soft needs a generator or queries plus pairs");
        }
        if (p.name == PhaseKind::human_hard) {
            if (p.train.loss != LossKind::ce_hard)
                throw ConfigError("human_hard trains with ce_hard");
        } else if (!is_soft_loss(p.train.loss)) {
            throw ConfigError(std::string(to_string(p.name)) + " requires a soft loss");
        }
    }
}

namespace {

ordered_json manifest_to_json(const ExperimentManifest& m) {
    ordered_json j;
    j["seed"] = m.seed;
    j["output_dir"] = m.output_dir.string();
    j["student"] = {{"dim", m.student.features.dim},
                    {"hash_seed", m.student.features.hash_seed},
                    {"hidden", m.student.hidden},
                    {"init_seed", m.student.init_seed}};
    if (!m.student.init_checkpoint.empty())
        j["student"]["init_checkpoint"] = m.student.init_checkpoint.string();
    auto& phases = j["phases"] = ordered_json::array();
    for (const auto& p : m.phases) {
        ordered_json pj;
        pj["name"] = std::string(to_string(p.name));
        pj["corpus"] = p.corpus.string();
        if (!p.queries.empty()) pj["queries"] = p.queries.string();
        if (!p.qrels.empty()) pj["qrels"] = p.qrels.string();
        if (!p.pairs.empty()) pj["pairs"] = p.pairs.string();
        if (p.generator)
            pj["generator"] = {{"n_queries", p.generator->n_queries},
                               {"min_terms", p.generator->min_terms},
                               {"max_terms", p.generator->max_terms},
                               {"seed", p.generator->seed}};
        pj["teacher"] = teacher_to_json(p.teacher);
        pj["bm25"] = {{"k1", p.bm25.k1}, {"b", p.bm25.b}};
        pj["sampler"] = {{"pool_k", p.sampler.pool_k},
                         {"negatives_per_positive", p.sampler.negatives_per_positive},
                         {"seed", p.sampler.seed}};
        pj["train"] = {{"loss", std::string(to_string(p.train.loss))},
                       {"learning_rate", p.train.learning_rate},
                       {"batch_size", p.train.batch_size},
                       {"epochs", p.train.epochs},
                       {"adam_beta1", p.train.adam_beta1},
                       {"adam_beta2", p.train.adam_beta2},
                       {"adam_eps", p.train.adam_eps},
                       {"weight_decay", p.train.weight_decay},
                       {"seed", p.train.seed}};
        phases.push_back(std::move(pj));
    }
    return j;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot digest missing file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return to_hex(fnv1a64(buf.str()));
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
}

}  // namespace

std::string manifest_config_hash(const ExperimentManifest& manifest) {
    ordered_json j = manifest_to_json(manifest);
    j.erase("output_dir");  // where outputs land must not change what they are
    auto& digests = j["input_digests"] = ordered_json::object();
    auto add_digest = [&](const std::filesystem::path& p) {
        if (!p.empty()) digests[p.filename().string() + ":" + to_hex(fnv1a64(p.string()))] =
            file_digest(p);
    };
    for (const auto& p : manifest.phases) {
        add_digest(p.corpus);
        add_digest(p.queries);
        add_digest(p.qrels);
        add_digest(p.pairs);
    }
    add_digest(manifest.student.init_checkpoint);
    return to_hex(fnv1a64(j.dump()));
}

ExperimentResult run_experiment(const ExperimentManifest& manifest, const RunOptions& options) {
    manifest.validate();
    ExperimentResult result;
    result.config_hash = manifest_config_hash(manifest);
    result.out_dir = manifest.output_dir / result.config_hash;
    std::filesystem::create_directories(result.out_dir);

    // resolved manifest is deterministic; the log carries wall-clock times
    write_text_file(result.out_dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
    std::ofstream log(result.out_dir / "run.log", std::ios::binary | std::ios::app);
    auto log_line = [&](const std::string& line) {
        const auto now = std::chrono::system_clock::now();
        const auto t = std::chrono::system_clock::to_time_t(now);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
        log << stamp << "Z " << line << '\n';
        log.flush();
    };
    log_line("experiment " + result.config_hash + " started");

    std::optional<LogitCache> cache;
    if (options.cache_path) cache.emplace(*options.cache_path);

    StudentModel model =
        manifest.student.init_checkpoint.empty()
            ? StudentModel::init(manifest.student.features, manifest.student.hidden,
                                 manifest.student.init_seed)
            : StudentModel::load(manifest.student.init_checkpoint);

    std::size_t phase_no = 0;
    try {
        for (const auto& phase : manifest.phases) {
            ++phase_no;
            PhaseArtifacts artifacts;
            artifacts.kind = phase.name;
            artifacts.dir = result.out_dir / ("phase" + std::to_string(phase_no));
            std::filesystem::create_directories(artifacts.dir);
            log_line("phase " + std::to_string(phase_no) + " (" +
                     std::string(to_string(phase.name)) + ") building triples");

            const auto corpus = read_corpus(phase.corpus);
            const auto index = InvertedIndex::build(corpus);
            auto teacher =
                make_teacher(phase.teacher, &index, phase.bm25, cache ? &*cache : nullptr);

            TripleBuildResult built;
            switch (phase.name) {
                case PhaseKind::phase1_human_soft:
                case PhaseKind::real_query_soft: {
                    const auto queries = read_queries(phase.queries);
                    const auto qrels = read_qrels(phase.qrels);
                    built = build_phase1_triples(corpus, queries, qrels, index, phase.bm25,
                                                 *teacher, phase.sampler);
                    break;
                }
                case PhaseKind::human_hard: {
                    const auto queries = read_queries(phase.queries);
                    const auto qrels = read_qrels(phase.qrels);
                    built = build_hard_triples(corpus, queries, qrels, index, phase.bm25,
                                               phase.sampler);
                    break;
                }
                case PhaseKind::phase2_synthetic_soft: {
                    std::vector<SyntheticPair> pairs;
                    if (phase.generator) {
                        ExtractiveGenerator generator(&index, *phase.generator);
                        pairs = build_synthetic_pairs(corpus, generator, *phase.generator);
                    } else {
                        const auto queries = read_queries(phase.queries);
                        const auto sidecar = read_pairs(phase.pairs);
                        std::unordered_map<std::string, const Query*> by_id;
                        for (const auto& q : queries) by_id.emplace(q.id, &q);
                        for (const auto& p : sidecar) {
                            auto it = by_id.find(p.query_id);
                            if (it == by_id.end())
                                throw ConfigError("pairs file references unknown query \"" +
                                                  p.query_id + "\"");
                            pairs.push_back({*it->second, p.doc_id});
                        }
                    }
                    built = build_phase2_triples(corpus, pairs, index, phase.bm25, *teacher,
                                                 phase.sampler);
                    break;
                }
            }

            artifacts.triples_file = artifacts.dir / "triples.jsonl";
            write_triples(artifacts.triples_file, built.triples);
            artifacts.stats = built.stats;

            log_line("phase " + std::to_string(phase_no) + " training on " +
                     std::to_string(built.triples.size()) + " triples");
            artifacts.train_report = train(model, built.triples, phase.train);

            artifacts.checkpoint = artifacts.dir / "model.ckpt";
            model.save(artifacts.checkpoint);

            ordered_json report;
            report["phase"] = std::string(to_string(phase.name));
            report["config_hash"] = result.config_hash;
            report["stats"] = {
                {"queries_total", artifacts.stats.queries_total},
                {"queries_skipped_no_positive", artifacts.stats.queries_skipped_no_positive},
                {"queries_skipped_empty_pool", artifacts.stats.queries_skipped_empty_pool},
                {"positives_missing_from_corpus",
                 artifacts.stats.positives_missing_from_corpus},
                {"triples", artifacts.stats.triples}};
            report["train"] = {{"epoch_mean_loss", artifacts.train_report.epoch_mean_loss},
                               {"steps", artifacts.train_report.steps},
                               {"final_checksum", artifacts.train_report.final_checksum}};
            artifacts.report_file = artifacts.dir / "report.json";
            write_text_file(artifacts.report_file, report.dump(2) + "\n");

            result.phases.push_back(std::move(artifacts));
        }
    } catch (const std::exception& e) {
        // keep partial outputs, mark the failure
        ordered_json aborted;
        aborted["failed_phase"] = phase_no;
        aborted["error"] = e.what();
        write_text_file(result.out_dir / "ABORTED.json", aborted.dump(2) + "\n");
        log_line("aborted in phase " + std::to_string(phase_no) + ": " + e.what());
        throw;
    }

    result.final_checkpoint = result.out_dir / "model.ckpt";
    model.save(result.final_checkpoint);
    log_line("experiment finished");
    return result;
}

}  // namespace distillrank
