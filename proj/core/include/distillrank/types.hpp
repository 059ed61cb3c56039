#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <variant>

#include "distillrank/error.hpp"

namespace distillrank {

struct Document {
    std::string id;     // unique within a corpus, non-empty
    std::string title;  // may be empty
    std::string text;   // non-empty

    bool operator==(const Document&) const = default;
};

/// Text fed to tokenizers and scorers: title-prefixed body.
inline std::string passage_text(const Document& doc) {
    return doc.title.empty() ? doc.text : doc.title + " " + doc.text;
}

enum class QueryOrigin { human, synthetic };

constexpr std::string_view to_string(QueryOrigin o) {
    return o == QueryOrigin::human ? "human" : "synthetic";
}

inline QueryOrigin query_origin_from_string(std::string_view s) {
    if (s == "human") return QueryOrigin::human;
    if (s == "synthetic") return QueryOrigin::synthetic;
    throw ConfigError("unknown query origin: \"" + std::string(s) + "\"");
}

struct Query {
    std::string id;
    std::string text;  // non-empty
    QueryOrigin origin = QueryOrigin::human;

    bool operator==(const Query&) const = default;
};

struct Qrel {
    std::string query_id;
    std::string doc_id;
    int grade = 0;  // >= 0

    bool operator==(const Qrel&) const = default;
};

/// Teacher or student output for one query-document pair: the scores of the
/// relevant ("true") and non-relevant ("false") classes.
struct LogitPair {
    double l_true = 0.0;
    double l_false = 0.0;

    bool finite() const { return std::isfinite(l_true) && std::isfinite(l_false); }
    bool operator==(const LogitPair&) const = default;
};

/// Zero-mean form of LogitPair: l_true + l_false == 0 (within 1e-12).
struct NormalizedLogitPair {
    double l_true = 0.0;
    double l_false = 0.0;

    bool operator==(const NormalizedLogitPair&) const = default;
};

/// One distillation training example. The label is either a teacher logit
/// pair (soft) or a binary relevance judgment (hard).
struct Triple {
    std::string query_id;
    std::string query_text;
    std::string doc_id;
    std::string doc_text;
    std::variant<LogitPair, bool> label;

    bool is_soft() const { return std::holds_alternative<LogitPair>(label); }
    const LogitPair& soft() const { return std::get<LogitPair>(label); }
    bool relevant() const { return std::get<bool>(label); }

    bool operator==(const Triple&) const = default;
};

/// One line of a TREC-style run file.
struct RunEntry {
    std::string query_id;
    std::string doc_id;
    int rank = 1;  // 1..n contiguous within a query
    double score = 0.0;
    std::string tag;

    bool operator==(const RunEntry&) const = default;
};

}  // namespace distillrank
