#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "distillrank/types.hpp"

namespace distillrank {

// JSONL formats (BEIR conventions)
//   corpus:  {"_id": str, "title": str, "text": str}
//   queries: {"_id": str, "text": str, "origin": "human"|"synthetic"}
//   triples: {"query_id", "query_text", "doc_id", "doc_text",
//             "label_kind": "soft"|"hard", "l_true"?, "l_false"?, "relevant"?}
// Whitespace-separated formats (TREC conventions)
//   qrels: query-id 0 doc-id grade
//   run:   query-id Q0 doc-id rank score tag
//
// All readers reject invalid UTF-8 and report the offending line. Doubles are
// written in shortest round-trip form; parse(serialize(x)) == x for valid x.

std::vector<Document> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, std::span<const Document> docs);

std::vector<Query> read_queries(const std::filesystem::path& path);
void write_queries(const std::filesystem::path& path, std::span<const Query> queries);

std::vector<Qrel> read_qrels(const std::filesystem::path& path);
void write_qrels(const std::filesystem::path& path, std::span<const Qrel> qrels);

/// Returns entries sorted by (query_id asc, rank asc). Rejects files where a
/// query's ranks are not contiguous from 1 or scores increase with rank.
std::vector<RunEntry> read_run(const std::filesystem::path& path);

/// Validates the run invariants, then writes entries sorted by
/// (query_id asc, rank asc).
void write_run(const std::filesystem::path& path, std::span<const RunEntry> entries);

std::vector<Triple> read_triples(const std::filesystem::path& path);
void write_triples(const std::filesystem::path& path, std::span<const Triple> triples);

}  // namespace distillrank
