#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curate/dedup.hpp"
#include "curate/quality.hpp"
#include "curate/sampling.hpp"

namespace curate {

/// Gate value meaning "max over every clf:* signal".
inline constexpr std::string_view kMaxClassifierGate = "max:clf";

struct StageSpec {
  std::string stage_id;
  std::string description;
  double token_share = 0.0;
  double quality_threshold = 0.0;
  std::string gating_signal{kMaxClassifierGate};
  // tag name -> target token fraction. A document falls in the first listed
  // tag (lexicographic) whose tag:<name> signal is 1, otherwise in "other"
  // when present. Empty means a single unstratified pool.
  std::map<std::string, double> mixture;

  bool operator==(const StageSpec&) const = default;
};

struct StagePlan {
  std::vector<StageSpec> stages;
  std::uint64_t total_token_budget = 0;

  bool operator==(const StagePlan&) const = default;
};

struct PlanViolation {
  std::string name;
  std::string message;
};

std::vector<PlanViolation> plan_violations(const StagePlan& plan);
/// Returns `plan` unchanged or throws ValidationError naming every violation.
const StagePlan& validate_plan(const StagePlan& plan);

/// Integer budgets by largest remainder; they sum to total_token_budget exactly.
std::vector<std::uint64_t> stage_budgets(const StagePlan& plan);

// (i) PL-heavy, (ii) PL+NL diverse, (iii) gradual quality shift,
// (iv) highest-quality anneal. Shares (0.15, 0.45, 0.30, 0.10) and thresholds
// (0.0, 0.0, 0.5, 0.9) are configuration defaults.
StagePlan four_stage_plan(std::uint64_t total_token_budget);

double gating_value(const QualitySignalVector& signals, const std::string& gate);

/// Indices into `docs` whose gating signal is >= the stage threshold.
std::vector<std::size_t> stage_eligible(std::span<const AnnotatedDocument> docs, const StageSpec& stage);

/// Mixture key a document falls into, or empty if it matches none.
std::string stratum_of(const QualitySignalVector& signals, const std::map<std::string, double>& mixture);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::uint32_t> encode(std::string_view text) const = 0;
  virtual std::uint32_t pad_id() const = 0;
};

// One token per whitespace-separated word; ids in [1, vocab_size) by hash,
// 0 reserved for padding.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  explicit WhitespaceTokenizer(std::uint32_t vocab_size = 102400) : vocab_size_(vocab_size) {}
  std::vector<std::uint32_t> encode(std::string_view text) const override;
  std::uint32_t pad_id() const override { return 0; }

 private:
  std::uint32_t vocab_size_;
};

struct ShardInfo {
  std::string file;  // relative to the manifest directory
  std::uint64_t tokens = 0;
  std::uint64_t documents = 0;
  std::string checksum;  // hash128 hex of the file bytes

  bool operator==(const ShardInfo&) const = default;
};

struct ShardManifest {
  std::string stage_id;
  std::uint64_t seed = 0;
  std::uint64_t budget = 0;
  std::uint64_t total_tokens = 0;
  std::uint64_t max_doc_tokens = 0;
  std::uint64_t eligible_documents = 0;
  std::map<std::string, std::uint64_t> stratum_tokens;
  std::vector<ShardInfo> shards;

  bool operator==(const ShardManifest&) const = default;
};

struct EmitOptions {
  std::uint64_t shard_tokens = 1 << 20;
};

/// hash(master_seed, stage_id); stages never share a random stream.
std::uint64_t stage_seed(std::uint64_t master_seed, std::string_view stage_id);

// Draws documents from `dist` restricted to `eligible` (renormalised),
// stratified so each mixture key receives its target share of tokens, until
// the stage budget is reached. Output: stage-<id>-NNNNN.jsonl shards of
// {"doc_id", "token_ids"} lines plus manifest.json in `out_dir`.
ShardManifest emit_stage(const StageSpec& stage, std::uint64_t budget, std::span<const AnnotatedDocument> eligible,
                         const MergedDistribution& dist, std::span<const DuplicateCluster> clusters,
                         const Tokenizer& tokenizer, std::uint64_t seed, const std::filesystem::path& out_dir,
                         const EmitOptions& options = {}, unsigned workers = 1);

std::string manifest_to_json(const ShardManifest& manifest);
ShardManifest manifest_from_json(std::string_view json);

/// Re-reads every shard; throws IntegrityError naming the first bad shard.
ShardManifest verify_manifest(const std::filesystem::path& dir);

struct ShardRecord {
  std::string doc_id;
  std::vector<std::uint32_t> token_ids;
};
std::vector<ShardRecord> read_shard(const std::filesystem::path& path);

}  // namespace curate
