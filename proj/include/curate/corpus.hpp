#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curate/hash.hpp"

namespace curate {

using Timestamp = std::chrono::sys_seconds;

/// One curated text unit in the raw-prepared layer.
///
/// `doc_id` is hex(content_hash) + "-" + hex(hash64(url, crawl_time)), so two
/// fetches of the same text share a content hash but keep distinct ids.
struct Document {
  std::string doc_id;
  std::string url;
  Timestamp crawl_time{};
  std::string language = "und";
  std::string snapshot_id;
  std::string domain;
  Hash128 content_hash;
  std::string text;
  std::map<std::string, std::string> extra;

  bool operator==(const Document&) const = default;
};

/// Documents in ascending doc_id order. That order is the determinism anchor
/// for every later phase.
struct Corpus {
  std::vector<Document> documents;
  std::map<std::string, std::string> provenance;

  std::size_t size() const { return documents.size(); }
  const Document* find(std::string_view doc_id) const;
  Document* find(std::string_view doc_id);
  /// Index of doc_id in `documents`, or npos.
  std::size_t index_of(std::string_view doc_id) const;
  void sort();
};

// NFC, CRLF -> LF, runs of more than two blank lines cut to two, then trim.
// Throws RejectedRecord("invalid_utf8") carrying the byte offset.
std::string normalize_text(std::string_view raw);

/// Lowercased host with any leading "www." removed. Empty if no host.
std::string extract_domain(std::string_view url);

/// Accepts YYYY-MM-DD[THH:MM[:SS[.fff]]][Z|(+|-)HH:MM]; fractions truncated.
Timestamp parse_iso8601(std::string_view s);
std::string format_iso8601(Timestamp t);

std::string make_doc_id(const Hash128& content_hash, std::string_view url, Timestamp crawl_time);

/// Parses one input line. Throws RejectedRecord on any defect.
Document ingest_record(std::string_view line);

struct IngestReport {
  std::size_t lines = 0;
  std::size_t accepted = 0;
  std::map<std::string, std::size_t> rejects;

  std::size_t rejected() const;
  bool operator==(const IngestReport&) const = default;
};

struct IngestResult {
  Corpus corpus;
  IngestReport report;
};

// Records are parsed across `workers` threads, merged and sorted by doc_id.
// A repeated doc_id (same url, crawl time and text) keeps the first line and
// rejects the rest as "duplicate_doc_id".
IngestResult ingest_lines(std::span<const std::string> lines, unsigned workers = 1);
IngestResult ingest_files(std::span<const std::filesystem::path> files, unsigned workers = 1);

// Corpus shard format: one JSON object per line with the input fields plus
// content_hash, doc_id, domain and extra.
std::string document_to_json(const Document& doc);
Document document_from_json(std::string_view line);

std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& dir, const Corpus& corpus,
                                                std::size_t docs_per_shard = 100000);
Corpus read_corpus(std::span<const std::filesystem::path> shards);
/// Shard files named corpus-*.jsonl in `dir`, sorted.
std::vector<std::filesystem::path> corpus_shards(const std::filesystem::path& dir);

std::string ingest_report_to_json(const IngestReport& report, const std::map<std::string, std::string>& provenance);
IngestReport ingest_report_from_json(std::string_view json);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace curate
