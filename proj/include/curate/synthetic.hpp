#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "curate/corpus.hpp"

namespace curate {

// Deterministic generator for test corpora with planted duplicates. Words are
// drawn from fixed pseudo-word pools, so unrelated documents share almost no
// 5-word shingles.
struct SyntheticSpec {
  std::size_t documents = 1000;  // total lines, duplicates included
  std::size_t near_duplicate_pairs = 50;
  std::size_t exact_triples = 20;
  std::size_t min_words = 60;
  std::size_t max_words = 160;
  std::size_t snapshots = 4;
  std::size_t domains = 50;
  double code_fraction = 0.2;
  double math_fraction = 0.1;
  double junk_fraction = 0.05;
  double near_duplicate_jaccard = 0.8;  // planted pairs have 5-shingle Jaccard >= this
  std::uint64_t seed = 7;
};

enum class SyntheticKind { prose, code, math, junk };

struct SyntheticCorpus {
  std::vector<std::string> lines;  // one JSON input record per line
  std::vector<SyntheticKind> kinds;
  std::vector<double> quality;  // share of "good" words used, per line
  std::vector<std::pair<std::size_t, std::size_t>> near_pairs;  // line indices
  std::vector<std::array<std::size_t, 3>> exact_triples;

  /// Distinct texts, i.e. the cluster count a perfect deduplicator finds.
  std::size_t planted_clusters() const;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec);

/// Text of `words` words; `quality` is the chance each word comes from the
/// good pool rather than the spam pool.
std::string synthetic_text(SyntheticKind kind, double quality, std::size_t words, std::uint64_t seed);

// Labelled training documents (only doc_id and text are set).
//   "quality": good-pool text vs spam-pool text
//   "code" / "math": that kind vs prose
//   "same": both classes from one distribution
struct TrainingSet {
  std::vector<Document> positives;
  std::vector<Document> negatives;
};
TrainingSet synthetic_training_set(const std::string& task, std::size_t per_class, std::uint64_t seed);

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

}  // namespace curate
