#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curate/curriculum.hpp"
#include "curate/dedup.hpp"
#include "curate/quality.hpp"
#include "curate/sampling.hpp"
#include "curate/train_prep.hpp"

namespace curate {

struct QualityConfig {
  AnnotationConfig annotation;
  std::vector<std::filesystem::path> classifiers;
  std::map<std::string, std::filesystem::path> domain_classifiers;
};

struct CurriculumConfig {
  StagePlan plan;
  std::uint64_t shard_tokens = 1 << 20;
  std::uint32_t vocab_size = 102400;
};

struct PrepConfig {
  PackingPolicy packing;
  RopeStage rope_stage = RopeStage::pretrain;
  std::uint32_t head_dim = 128;
  std::optional<LrScheduleSpec> schedule;
};

struct PipelineConfig {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path work_dir;
  std::size_t docs_per_shard = 100000;
  DedupConfig dedup;
  QualityConfig quality;
  std::vector<UpsamplePolicy> sampling;
  CurriculumConfig curriculum;
  PrepConfig prep;
  std::uint64_t master_seed = 0;
  unsigned workers = 1;
  std::string stop_after;  // empty: run every phase

  /// Checks every sub-config and referenced file; throws ValidationError.
  void validate() const;
  /// Hash of everything that can change an output byte. Excludes workers,
  /// work_dir and stop_after.
  std::string hash() const;
  std::string canonical_json() const;
};

// Config files are JSON. Relative paths are resolved against `base_dir`.
PipelineConfig pipeline_config_from_json(std::string_view text, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

DedupConfig dedup_config_from_json(std::string_view text);
StagePlan plan_from_json(std::string_view text);
std::string plan_to_json(const StagePlan& plan);
LrScheduleSpec schedule_from_json(std::string_view text);
std::vector<UpsamplePolicy> policies_from_json(std::string_view text);

/// Default sampling block: log2_sublinear(6) on freq:occurrence, threshold
/// boosts on the tags, identity on each classifier; uniform lambda.
std::vector<UpsamplePolicy> default_policies(const std::vector<std::string>& classifier_ids);

}  // namespace curate
