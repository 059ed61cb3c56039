#include "distillrank/corpus_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "distillrank/error.hpp"
#include "distillrank/text.hpp"

namespace distillrank {

namespace {

using ordered_json = nlohmann::ordered_json;

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

/// Calls fn(line_number, line) for each non-empty line.
template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    auto in = open_input(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        fn(line_no, line);
    }
}

ordered_json parse_json_line(const std::filesystem::path& path, std::size_t line_no,
                             const std::string& line) {
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError(path.string(), line_no, "malformed JSON");
    if (!j.is_object()) throw ParseError(path.string(), line_no, "expected a JSON object");
    return j;
}

std::string require_string(const ordered_json& j, const char* key,
                           const std::filesystem::path& path, std::size_t line_no) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw ParseError(path.string(), line_no,
                         std::string("missing or non-string field \"") + key + "\"");
    return it->get<std::string>();
}

double require_finite_number(const ordered_json& j, const char* key,
                             const std::filesystem::path& path, std::size_t line_no) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number())
        throw ParseError(path.string(), line_no,
                         std::string("missing or non-numeric field \"") + key + "\"");
    double v = it->get<double>();
    if (!std::isfinite(v))
        throw ParseError(path.string(), line_no, std::string("non-finite field \"") + key + "\"");
    return v;
}

void check_utf8(std::string_view s, const std::filesystem::path& path, std::size_t line_no) {
    if (!utf8_valid(s)) throw ParseError(path.string(), line_no, "invalid UTF-8");
}

void check_record_utf8(std::initializer_list<std::string_view> fields, const char* what) {
    for (auto f : fields)
        if (!utf8_valid(f)) throw IoError(std::string("invalid UTF-8 in ") + what);
}

void validate_run_group(std::span<const RunEntry> group, const std::string& where) {
    // group is sorted by rank; ranks 1..n contiguous, scores non-increasing
    for (std::size_t i = 0; i < group.size(); ++i) {
        if (group[i].rank != static_cast<int>(i) + 1)
            throw ParseError(where + ": query " + group[i].query_id +
                             ": ranks not contiguous from 1");
        if (i > 0 && group[i].score > group[i - 1].score)
            throw ParseError(where + ": query " + group[i].query_id +
                             ": scores increase with rank");
    }
}

std::vector<RunEntry> sort_and_validate_run(std::vector<RunEntry> entries,
                                            const std::string& where) {
    std::stable_sort(entries.begin(), entries.end(), [](const RunEntry& a, const RunEntry& b) {
        if (a.query_id != b.query_id) return a.query_id < b.query_id;
        return a.rank < b.rank;
    });
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= entries.size(); ++i) {
        if (i == entries.size() || entries[i].query_id != entries[begin].query_id) {
            validate_run_group({entries.data() + begin, i - begin}, where);
            begin = i;
        }
    }
    return entries;
}

}  // namespace

std::vector<Document> read_corpus(const std::filesystem::path& path) {
    std::vector<Document> docs;
    std::unordered_set<std::string> seen;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        auto j = parse_json_line(path, line_no, line);
        Document d;
        d.id = require_string(j, "_id", path, line_no);
        d.title = require_string(j, "title", path, line_no);
        d.text = require_string(j, "text", path, line_no);
        if (d.id.empty()) throw ParseError(path.string(), line_no, "empty \"_id\"");
        if (d.text.empty()) throw ParseError(path.string(), line_no, "empty \"text\"");
        if (!seen.insert(d.id).second)
            throw ParseError(path.string(), line_no, "duplicate document id \"" + d.id + "\"");
        docs.push_back(std::move(d));
    });
    return docs;
}

void write_corpus(const std::filesystem::path& path, std::span<const Document> docs) {
    auto out = open_output(path);
    std::unordered_set<std::string> seen;
    for (const auto& d : docs) {
        if (d.id.empty() || d.text.empty())
            throw IoError("document \"" + d.id + "\": empty id or text");
        if (!seen.insert(d.id).second) throw IoError("duplicate document id \"" + d.id + "\"");
        check_record_utf8({d.id, d.title, d.text}, "document");
        ordered_json j{{"_id", d.id}, {"title", d.title}, {"text", d.text}};
        out << j.dump() << '\n';
    }
}

std::vector<Query> read_queries(const std::filesystem::path& path) {
    std::vector<Query> queries;
    std::unordered_set<std::string> seen;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        auto j = parse_json_line(path, line_no, line);
        Query q;
        q.id = require_string(j, "_id", path, line_no);
        q.text = require_string(j, "text", path, line_no);
        // origin is ours; queries from external tooling default to human
        if (j.contains("origin"))
            q.origin = query_origin_from_string(require_string(j, "origin", path, line_no));
        if (q.id.empty()) throw ParseError(path.string(), line_no, "empty \"_id\"");
        if (q.text.empty()) throw ParseError(path.string(), line_no, "empty \"text\"");
        if (!seen.insert(q.id).second)
            throw ParseError(path.string(), line_no, "duplicate query id \"" + q.id + "\"");
        queries.push_back(std::move(q));
    });
    return queries;
}

void write_queries(const std::filesystem::path& path, std::span<const Query> queries) {
    auto out = open_output(path);
    std::unordered_set<std::string> seen;
    for (const auto& q : queries) {
        if (q.id.empty() || q.text.empty())
            throw IoError("query \"" + q.id + "\": empty id or text");
        if (!seen.insert(q.id).second) throw IoError("duplicate query id \"" + q.id + "\"");
        check_record_utf8({q.id, q.text}, "query");
        ordered_json j{{"_id", q.id}, {"text", q.text}, {"origin", to_string(q.origin)}};
        out << j.dump() << '\n';
    }
}

std::vector<Qrel> read_qrels(const std::filesystem::path& path) {
    std::vector<Qrel> qrels;
    std::unordered_set<std::string> seen;  // query_id \x1f doc_id
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        check_utf8(line, path, line_no);
        auto tokens = split_whitespace(line);
        if (tokens.size() != 4)
            throw ParseError(path.string(), line_no, "expected 4 fields, got " +
                                                         std::to_string(tokens.size()));
        Qrel r;
        r.query_id = std::string(tokens[0]);
        r.doc_id = std::string(tokens[2]);
        long long grade = 0;
        if (!parse_int(tokens[3], grade) || grade < 0)
            throw ParseError(path.string(), line_no,
                             "grade must be a non-negative integer, got \"" +
                                 std::string(tokens[3]) + "\"");
        r.grade = static_cast<int>(grade);
        if (!seen.insert(r.query_id + '\x1f' + r.doc_id).second)
            throw ParseError(path.string(), line_no,
                             "duplicate qrel (" + r.query_id + ", " + r.doc_id + ")");
        qrels.push_back(std::move(r));
    });
    return qrels;
}

void write_qrels(const std::filesystem::path& path, std::span<const Qrel> qrels) {
    auto out = open_output(path);
    std::unordered_set<std::string> seen;
    for (const auto& r : qrels) {
        if (r.grade < 0) throw IoError("negative grade for (" + r.query_id + ", " + r.doc_id + ")");
        if (!seen.insert(r.query_id + '\x1f' + r.doc_id).second)
            throw IoError("duplicate qrel (" + r.query_id + ", " + r.doc_id + ")");
        check_record_utf8({r.query_id, r.doc_id}, "qrel");
        out << r.query_id << " 0 " << r.doc_id << ' ' << r.grade << '\n';
    }
}

std::vector<RunEntry> read_run(const std::filesystem::path& path) {
    std::vector<RunEntry> entries;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        check_utf8(line, path, line_no);
        auto tokens = split_whitespace(line);
        if (tokens.size() != 6)
            throw ParseError(path.string(), line_no, "expected 6 fields, got " +
                                                         std::to_string(tokens.size()));
        RunEntry e;
        e.query_id = std::string(tokens[0]);
        e.doc_id = std::string(tokens[2]);
        long long rank = 0;
        if (!parse_int(tokens[3], rank) || rank < 1)
            throw ParseError(path.string(), line_no,
                             "rank must be a positive integer, got \"" + std::string(tokens[3]) +
                                 "\"");
        e.rank = static_cast<int>(rank);
        if (!parse_double(tokens[4], e.score) || !std::isfinite(e.score))
            throw ParseError(path.string(), line_no,
                             "score must be a finite number, got \"" + std::string(tokens[4]) +
                                 "\"");
        e.tag = std::string(tokens[5]);
        entries.push_back(std::move(e));
    });
    return sort_and_validate_run(std::move(entries), path.string());
}

void write_run(const std::filesystem::path& path, std::span<const RunEntry> entries) {
    auto sorted = sort_and_validate_run({entries.begin(), entries.end()}, path.string());
    auto out = open_output(path);
    for (const auto& e : sorted) {
        check_record_utf8({e.query_id, e.doc_id, e.tag}, "run entry");
        out << e.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << format_double(e.score)
            << ' ' << e.tag << '\n';
    }
}

std::vector<Triple> read_triples(const std::filesystem::path& path) {
    std::vector<Triple> triples;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        auto j = parse_json_line(path, line_no, line);
        Triple t;
        t.query_id = require_string(j, "query_id", path, line_no);
        t.query_text = require_string(j, "query_text", path, line_no);
        t.doc_id = require_string(j, "doc_id", path, line_no);
        t.doc_text = require_string(j, "doc_text", path, line_no);
        const std::string kind = require_string(j, "label_kind", path, line_no);
        if (kind == "soft") {
            LogitPair logits;
            logits.l_true = require_finite_number(j, "l_true", path, line_no);
            logits.l_false = require_finite_number(j, "l_false", path, line_no);
            t.label = logits;
        } else if (kind == "hard") {
            auto it = j.find("relevant");
            if (it == j.end() || !it->is_boolean())
                throw ParseError(path.string(), line_no, "missing or non-boolean \"relevant\"");
            t.label = it->get<bool>();
        } else {
            throw ParseError(path.string(), line_no, "unknown label_kind \"" + kind + "\"");
        }
        triples.push_back(std::move(t));
    });
    return triples;
}

void write_triples(const std::filesystem::path& path, std::span<const Triple> triples) {
    auto out = open_output(path);
    for (const auto& t : triples) {
        check_record_utf8({t.query_id, t.query_text, t.doc_id, t.doc_text}, "triple");
        ordered_json j{{"query_id", t.query_id},
                       {"query_text", t.query_text},
                       {"doc_id", t.doc_id},
                       {"doc_text", t.doc_text}};
        if (t.is_soft()) {
            const auto& logits = t.soft();
            if (!logits.finite())
                throw IoError("non-finite soft label for (" + t.query_id + ", " + t.doc_id + ")");
            j["label_kind"] = "soft";
            j["l_true"] = logits.l_true;
            j["l_false"] = logits.l_false;
        } else {
            j["label_kind"] = "hard";
            j["relevant"] = t.relevant();
        }
        out << j.dump() << '\n';
    }
}

}  // namespace distillrank
