#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "curate/config.hpp"

namespace curate {

inline constexpr std::array<std::string_view, 6> kPhases = {"ingest", "dedup", "quality", "sample", "curriculum", "prep"};

struct PhaseCounts {
  std::size_t in = 0;
  std::size_t out = 0;
  std::map<std::string, std::size_t> rejects;

  bool operator==(const PhaseCounts&) const = default;
};

struct SignalQuantiles {
  double p0 = 0, p25 = 0, p50 = 0, p75 = 0, p100 = 0;
  bool operator==(const SignalQuantiles&) const = default;
};

struct StageTotals {
  std::string stage_id;
  std::uint64_t budget = 0;
  std::uint64_t emitted_tokens = 0;
  std::uint64_t max_doc_tokens = 0;
  std::uint64_t eligible_documents = 0;
  std::map<std::string, std::uint64_t> stratum_tokens;
  std::vector<std::string> shard_checksums;

  bool operator==(const StageTotals&) const = default;
};

struct PackTotals {
  std::string stage_id;
  std::uint64_t sequences = 0;
  std::uint64_t tokens = 0;
  std::uint64_t pad_tokens = 0;
  std::string checksum;

  bool operator==(const PackTotals&) const = default;
};

struct PipelineReport {
  std::string config_hash;
  std::map<std::string, bool> present;  // phase -> completed artifacts found

  PhaseCounts ingest;   // in: input lines, out: accepted documents
  PhaseCounts dedup;    // in: documents, out: retained variants
  PhaseCounts quality;  // in: retained variants, out: heuristics survivors
  PhaseCounts sample;   // in = out: documents carrying a sampling weight

  std::size_t clusters = 0;
  double duplicate_rate = 0.0;  // 1 - clusters / documents
  std::map<std::size_t, std::size_t> cluster_size_histogram;
  std::map<std::string, SignalQuantiles> signal_quantiles;
  std::map<std::string, double> mixture_weights;

  std::uint64_t total_token_budget = 0;
  std::vector<StageTotals> stages;
  std::uint32_t sequence_length = 0;
  std::vector<PackTotals> packs;

  // Populated by run() only; excluded from comparisons.
  std::map<std::string, double> timing_seconds;
  std::map<std::string, std::string> phase_status;

  /// Empty when every count-reconciliation invariant holds.
  std::vector<std::string> reconciliation_failures() const;
  std::string to_json(bool include_run_info = true) const;
};

// Runs ingest -> dedup -> quality -> sample -> curriculum -> prep under
// cfg.work_dir/<phase>/. A phase whose recorded key and output checksums
// still match is skipped. A phase is built in <phase>.partial and renamed on
// success; on failure the .partial directory stays and PhaseError is thrown.
PipelineReport run(const PipelineConfig& cfg);

/// Rebuilds the report from on-disk artifacts alone.
PipelineReport report(const std::filesystem::path& work_dir);

}  // namespace curate
