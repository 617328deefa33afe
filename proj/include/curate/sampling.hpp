#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "curate/dedup.hpp"
#include "curate/quality.hpp"
#include "curate/rng.hpp"

namespace curate {

enum class TransformKind { identity, threshold, log2_sublinear };

struct UpsampleTransform {
  TransformKind kind = TransformKind::identity;
  double threshold = 0.0;  // threshold: value >= threshold -> boost, else 1
  double boost = 1.0;
  double cap = 6.0;  // log2_sublinear: min(1 + floor(log2(max(c, 1))), cap)

  double operator()(double value) const;

  static UpsampleTransform identity() { return {}; }
  static UpsampleTransform threshold_boost(double t, double boost) {
    return {TransformKind::threshold, t, boost, 0.0};
  }
  static UpsampleTransform log2_sublinear(double cap) { return {TransformKind::log2_sublinear, 0.0, 1.0, cap}; }

  bool operator==(const UpsampleTransform&) const = default;
};

std::string to_string(TransformKind kind);
TransformKind transform_kind_from_string(const std::string& name);

struct UpsamplePolicy {
  std::string signal;
  UpsampleTransform transform;
  std::optional<double> lambda;  // unset: uniform share among policies

  bool operator==(const UpsamplePolicy&) const = default;
};

/// Per-signal weights over documents; doc_ids ascending.
struct WeightMap {
  std::string signal;
  std::vector<std::string> doc_ids;
  Eigen::VectorXd weights;
};

WeightMap build_weight_map(std::span<const AnnotatedDocument> docs, const UpsamplePolicy& policy);

struct MergedDistribution {
  std::vector<std::string> doc_ids;  // ascending
  Eigen::VectorXd probabilities;
  std::map<std::string, double> mixture_weights;

  /// 0 for ids outside the support.
  double probability(const std::string& doc_id) const;
  /// Keeps ids satisfying `keep` and renormalises. Throws if no mass remains.
  MergedDistribution restricted(const std::function<bool(const std::string&)>& keep) const;
};

// p(d) = sum_s lambda_s * w_s(d) / sum(w_s). Signal s contributes at most
// lambda_s of the total mass.
MergedDistribution merge_distributions(std::span<const WeightMap> maps, std::span<const double> lambdas);

/// Resolves unset lambdas to an even split of the remaining mass.
std::vector<double> resolve_lambdas(std::span<const UpsamplePolicy> policies);

/// retained_ids[repetition % size]
const std::string& select_variant(const DuplicateCluster& cluster, std::size_t repetition);

// Draws clusters with probability equal to the summed mass of their
// retained variants in `dist`, then rotates through those variants on
// repeated draws of the same cluster. Documents in `dist` must be retained
// members of some cluster.
class ClusterSampler {
 public:
  ClusterSampler(const MergedDistribution& dist, std::span<const DuplicateCluster> clusters);

  std::string next(Rng& rng);
  std::size_t cluster_count() const { return variants_.size(); }

 private:
  std::vector<std::vector<std::string>> variants_;
  std::vector<double> cumulative_;
  std::vector<std::size_t> repetitions_;
};

std::vector<std::string> draw(const MergedDistribution& dist, std::span<const DuplicateCluster> clusters,
                              std::uint64_t seed, std::size_t n);

// Weights file: one JSON line per document with doc_id, per-signal weights
// and the merged probability, preceded by a header line with the mixture.
void write_weights(const std::filesystem::path& path, std::span<const WeightMap> maps,
                   const MergedDistribution& dist);
MergedDistribution read_weights(const std::filesystem::path& path);

}  // namespace curate
