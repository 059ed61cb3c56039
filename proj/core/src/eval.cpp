#include "distillrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "distillrank/error.hpp"
#include "distillrank/parallel.hpp"
#include "distillrank/text.hpp"

namespace distillrank {

std::vector<RunEntry> rerank(const ScoreFn& scorer, const Query& query,
                             std::span<const RerankCandidate> candidates, std::size_t k,
                             std::string_view tag) {
    if (candidates.empty()) throw ConfigError("rerank requires at least one candidate");
    if (k == 0) throw ConfigError("rerank requires k >= 1");
    struct Scored {
        const RerankCandidate* candidate;
        double score;
    };
    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (const auto& c : candidates) scored.push_back({&c, scorer(query, c)});
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.candidate->doc_id < b.candidate->doc_id;
    });
    const std::size_t n = std::min(k, scored.size());
    std::vector<RunEntry> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({query.id, scored[i].candidate->doc_id, static_cast<int>(i) + 1,
                       scored[i].score, std::string(tag)});
    return out;
}

std::vector<RunEntry> rerank(const StudentModel& model, const Query& query,
                             std::span<const RerankCandidate> candidates, std::size_t k,
                             std::string_view tag) {
    return rerank(
        [&model](const Query& q, const RerankCandidate& c) {
            return rank_score(model, q.text, c.doc_text);
        },
        query, candidates, k, tag);
}

std::optional<double> ndcg_at_k(std::span<const std::string> ranked_doc_ids,
                                std::span<const Qrel> query_qrels, int k) {
    if (k < 1) throw ConfigError("ndcg requires k >= 1");
    std::unordered_map<std::string_view, int> grade;
    std::vector<int> grades;
    bool any_relevant = false;
    for (const auto& qrel : query_qrels) {
        grade[qrel.doc_id] = qrel.grade;
        grades.push_back(qrel.grade);
        if (qrel.grade > 0) any_relevant = true;
    }
    if (!any_relevant) return std::nullopt;

    const auto depth = static_cast<std::size_t>(k);
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(depth, ranked_doc_ids.size()); ++i) {
        auto it = grade.find(ranked_doc_ids[i]);
        if (it == grade.end() || it->second <= 0) continue;
        const double gain = std::exp2(static_cast<double>(it->second)) - 1.0;
        dcg += gain / std::log2(static_cast<double>(i) + 2.0);
    }
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(depth, grades.size()); ++i) {
        if (grades[i] <= 0) break;
        idcg += (std::exp2(static_cast<double>(grades[i])) - 1.0) /
                std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg / idcg;
}

RunEvaluation evaluate_run(std::span<const RunEntry> run, std::span<const Qrel> qrels, int k) {
    // group run entries by query, ordered by rank
    std::map<std::string, std::vector<const RunEntry*>> by_query;
    for (const auto& e : run) by_query[e.query_id].push_back(&e);
    std::unordered_map<std::string, std::vector<Qrel>> qrels_by_query;
    for (const auto& q : qrels) qrels_by_query[q.query_id].push_back(q);

    RunEvaluation result;
    double sum = 0.0;
    for (auto& [query_id, entries] : by_query) {
        std::sort(entries.begin(), entries.end(),
                  [](const RunEntry* a, const RunEntry* b) { return a->rank < b->rank; });
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i]->rank != static_cast<int>(i) + 1)
                throw ConfigError("run ranks for query " + query_id +
                                  " are not contiguous from 1");
        auto it = qrels_by_query.find(query_id);
        if (it == qrels_by_query.end()) {
            ++result.skipped;  // judged nowhere: excluded
            continue;
        }
        std::vector<std::string> ranked;
        ranked.reserve(entries.size());
        for (const auto* e : entries) ranked.push_back(e->doc_id);
        const auto score = ndcg_at_k(ranked, it->second, k);
        if (!score) {
            ++result.skipped;  // no relevant judgment: undefined
            continue;
        }
        result.per_query[query_id] = *score;
        sum += *score;
        ++result.evaluated;
    }
    result.mean_ndcg = result.evaluated == 0 ? 0.0 : sum / static_cast<double>(result.evaluated);
    return result;
}

EvalReport evaluate_splits(const StudentModel& model,
                           const std::map<std::string, DatasetBundle>& datasets,
                           std::span<const SplitSpec> splits, int k, int threads) {
    for (const auto& split : splits) {
        std::set<std::string> unique(split.datasets.begin(), split.datasets.end());
        if (unique.size() != split.datasets.size())
            throw ConfigError("split \"" + split.name + "\" lists a dataset twice");
        for (const auto& name : split.datasets)
            if (!datasets.contains(name))
                throw ConfigError("split \"" + split.name + "\" references unknown dataset \"" +
                                  name + "\"");
    }

    EvalReport report;
    report.k = k;
    for (const auto& [name, bundle] : datasets) {
        std::unordered_map<std::string, const Document*> docs;
        for (const auto& d : bundle.corpus) docs.emplace(d.id, &d);

        std::vector<std::vector<RunEntry>> runs(bundle.queries.size());
        parallel_for(bundle.queries.size(), threads, [&](std::size_t qi) {
            const auto& query = bundle.queries[qi];
            auto it = bundle.candidates.find(query.id);
            if (it == bundle.candidates.end() || it->second.empty()) return;
            std::vector<RerankCandidate> cands;
            cands.reserve(it->second.size());
            for (const auto& doc_id : it->second) {
                auto dit = docs.find(doc_id);
                if (dit == docs.end())
                    throw ConfigError("dataset \"" + name + "\": candidate doc \"" + doc_id +
                                      "\" missing from corpus");
                cands.push_back({doc_id, passage_text(*dit->second)});
            }
            runs[qi] = rerank(model, query, cands, static_cast<std::size_t>(k), name);
        });

        std::vector<RunEntry> run;
        for (auto& r : runs) run.insert(run.end(), r.begin(), r.end());
        const auto eval = evaluate_run(run, bundle.qrels, k);
        // queries with no candidates never reached the run
        std::size_t no_candidates = 0;
        for (std::size_t qi = 0; qi < runs.size(); ++qi)
            if (runs[qi].empty()) ++no_candidates;
        report.per_dataset[name] = {eval.mean_ndcg, eval.evaluated,
                                    eval.skipped + no_candidates};
    }
    for (const auto& split : splits) {
        double sum = 0.0;
        for (const auto& name : split.datasets) sum += report.per_dataset.at(name).ndcg;
        report.split_means[split.name] =
            split.datasets.empty() ? 0.0 : sum / static_cast<double>(split.datasets.size());
    }
    return report;
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
    nlohmann::ordered_json j;
    j["format"] = "distillrank.eval_report";
    j["version"] = 1;
    j["k"] = report.k;
    auto& per_dataset = j["per_dataset"] = nlohmann::ordered_json::object();
    for (const auto& [name, eval] : report.per_dataset)
        per_dataset[name] = {{"ndcg", eval.ndcg},
                             {"queries_evaluated", eval.queries_evaluated},
                             {"queries_skipped", eval.queries_skipped}};
    auto& split_means = j["split_means"] = nlohmann::ordered_json::object();
    for (const auto& [name, mean] : report.split_means) split_means[name] = mean;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

EvalReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || j.value("format", "") != "distillrank.eval_report")
        throw ParseError(path.string() + ": not an eval report");
    EvalReport report;
    report.k = j.value("k", 10);
    for (const auto& [name, e] : j.at("per_dataset").items())
        report.per_dataset[name] = {e.at("ndcg").get<double>(),
                                    e.at("queries_evaluated").get<std::size_t>(),
                                    e.at("queries_skipped").get<std::size_t>()};
    if (j.contains("split_means"))
        for (const auto& [name, mean] : j.at("split_means").items())
            report.split_means[name] = mean.get<double>();
    return report;
}

std::string render_report_table(const EvalReport& report) {
    std::ostringstream out;
    out << "dataset\tnDCG@" << report.k << "\tevaluated\tskipped\n";
    for (const auto& [name, eval] : report.per_dataset)
        out << name << '\t' << format_double(eval.ndcg) << '\t' << eval.queries_evaluated << '\t'
            << eval.queries_skipped << '\n';
    for (const auto& [name, mean] : report.split_means)
        out << "mean(" << name << ")\t" << format_double(mean) << "\t-\t-\n";
    return out.str();
}

std::string render_comparison_csv(
    std::span<const std::pair<std::string, EvalReport>> named_reports) {
    std::set<std::string> datasets;
    for (const auto& [name, report] : named_reports)
        for (const auto& [dataset, eval] : report.per_dataset) datasets.insert(dataset);
    std::ostringstream out;
    out << "dataset";
    for (const auto& [name, report] : named_reports) out << ',' << name;
    out << '\n';
    for (const auto& dataset : datasets) {
        out << dataset;
        for (const auto& [name, report] : named_reports) {
            auto it = report.per_dataset.find(dataset);
            out << ',';
            if (it != report.per_dataset.end()) out << format_double(it->second.ndcg);
        }
        out << '\n';
    }
    std::set<std::string> split_names;
    for (const auto& [name, report] : named_reports)
        for (const auto& [split, mean] : report.split_means) split_names.insert(split);
    for (const auto& split : split_names) {
        out << "mean(" << split << ')';
        for (const auto& [name, report] : named_reports) {
            auto it = report.split_means.find(split);
            out << ',';
            if (it != report.split_means.end()) out << format_double(it->second);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace distillrank
