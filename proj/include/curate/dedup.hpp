#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "curate/corpus.hpp"

namespace curate {

struct DedupConfig {
  std::size_t shingle_width = 5;
  std::size_t permutations = 128;
  std::size_t bands = 16;
  std::size_t rows = 8;
  double jaccard_threshold = 0.8;
  std::size_t top_k = 3;
  std::uint64_t perm_seed = 0x6a09e667f3bcc908ULL;

  /// Throws ValidationError listing every violated constraint.
  void validate() const;
  bool operator==(const DedupConfig&) const = default;
};

/// Sorted, unique 64-bit hashes of lowercased w-word windows.
struct ShingleSet {
  std::vector<std::uint64_t> hashes;
  std::size_t width = 0;

  std::size_t size() const { return hashes.size(); }
  bool empty() const { return hashes.empty(); }
};

ShingleSet shingle(std::string_view text, std::size_t width);

/// Exact |A ∩ B| / |A ∪ B|. Two empty sets have similarity 1.
double jaccard(const ShingleSet& a, const ShingleSet& b);

struct MinHashSignature {
  std::vector<std::uint64_t> values;
  std::uint64_t perm_seed = 0;

  bool operator==(const MinHashSignature&) const = default;
};

// values[i] = min over shingles of mix64(x ^ key_i), key_i derived from
// (perm_seed, i). Each mix is a bijection, so each row is a permutation.
MinHashSignature minhash_signature(const ShingleSet& shingles, const DedupConfig& cfg);

/// Fraction of equal components. Signatures must have equal length and seed.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

struct KeyedSignature {
  std::string doc_id;
  MinHashSignature signature;
};

/// (smaller id, larger id)
using IdPair = std::pair<std::string, std::string>;

// A pair is emitted iff the two signatures agree on every row of at least one
// band. Output sorted lexicographically and free of repeats.
std::vector<IdPair> lsh_candidate_pairs(std::span<const KeyedSignature> signatures, const DedupConfig& cfg,
                                        unsigned workers = 1);

struct FrequencySignals {
  std::size_t occurrence_count = 0;
  std::size_t snapshot_count = 0;
  std::size_t domain_count = 0;

  bool operator==(const FrequencySignals&) const = default;
};

struct DuplicateCluster {
  std::string cluster_id;
  std::vector<std::string> member_ids;    // ascending
  std::vector<std::string> retained_ids;  // rank order, canonical first
  FrequencySignals signals;

  bool operator==(const DuplicateCluster&) const = default;
};

// Connected components over verified edges: candidate pairs whose exact
// shingle Jaccard is >= tau, plus every pair sharing a content hash. Members
// of a component are linked by a chain of such edges; two members need not be
// similar to each other directly. cluster_id is the smallest member id and
// clusters are ordered by it. retained_ids is left empty.
std::vector<DuplicateCluster> build_clusters(const Corpus& corpus, std::span<const IdPair> candidate_pairs,
                                             const DedupConfig& cfg, unsigned workers = 1);

/// `true` when `a` should be kept ahead of `b`. Must be a strict total order.
using VariantRank = std::function<bool(const Document& a, const Document& b)>;

/// Longer normalized text (UTF-8 bytes) first, then smaller doc_id.
bool default_variant_rank(const Document& a, const Document& b);

DuplicateCluster retain_top_k(DuplicateCluster cluster, const Corpus& corpus, const DedupConfig& cfg,
                              const VariantRank& rank = default_variant_rank);

FrequencySignals frequency_signals(std::span<const std::string> member_ids, const Corpus& corpus);

struct DedupStats {
  std::size_t documents = 0;
  std::size_t candidate_pairs = 0;
  std::size_t verified_edges = 0;
  std::size_t clusters = 0;
  std::size_t retained = 0;
};

struct DedupResult {
  std::vector<DuplicateCluster> clusters;
  DedupStats stats;
};

/// shingle -> sign -> band -> verify -> cluster -> retain, end to end.
DedupResult deduplicate(const Corpus& corpus, const DedupConfig& cfg, unsigned workers = 1);

// Writes cluster_id, retained_rank (or "-1") and the freq:* counts into each
// member's Document::extra.
void annotate_clusters(Corpus& corpus, std::span<const DuplicateCluster> clusters);

std::string cluster_to_json(const DuplicateCluster& cluster);
DuplicateCluster cluster_from_json(std::string_view line);
void write_clusters(const std::filesystem::path& path, std::span<const DuplicateCluster> clusters);
std::vector<DuplicateCluster> read_clusters(const std::filesystem::path& path);

}  // namespace curate
