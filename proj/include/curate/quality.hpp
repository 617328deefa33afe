#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "curate/corpus.hpp"
#include "curate/dedup.hpp"

namespace curate {

// ---------------------------------------------------------------------------
// Heuristics
// ---------------------------------------------------------------------------

struct HeuristicThresholds {
  std::size_t min_words = 20;
  double min_mean_word_length = 2.0;
  double max_mean_word_length = 12.0;
  double min_alpha_ratio = 0.6;
  double max_line_repeat_ratio = 0.5;

  bool operator==(const HeuristicThresholds&) const = default;
};

// word_count and mean_word_length (code points) use Unicode-whitespace words.
// alpha_ratio is alphabetic / non-whitespace code points.
// max_line_repeat_ratio is the fraction of non-blank lines whose trimmed
// content occurs more than once in the document.
struct HeuristicStats {
  std::size_t word_count = 0;
  double mean_word_length = 0.0;
  double alpha_ratio = 0.0;
  double max_line_repeat_ratio = 0.0;
};

enum class Verdict { keep, drop };

struct HeuristicReport {
  Verdict verdict = Verdict::keep;
  std::vector<std::string> reasons;  // "min_words", "mean_word_length", "alpha_ratio", "line_repeat"
  HeuristicStats stats;
};

HeuristicStats heuristic_stats(std::string_view text);
HeuristicReport heuristic_filter(const Document& doc, const HeuristicThresholds& thresholds = {});

// ---------------------------------------------------------------------------
// Linear bag-of-n-grams classifiers
// ---------------------------------------------------------------------------

struct ClassifierHyper {
  unsigned max_order = 2;          // 1 = unigrams, 2 = unigrams + bigrams
  std::size_t max_vocab = 1 << 20;  // most frequent n-grams kept
  unsigned epochs = 5;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;

  bool operator==(const ClassifierHyper&) const = default;
};

struct TrainingMeta {
  std::string source;
  double train_accuracy = 0.0;

  bool operator==(const TrainingMeta&) const = default;
};

/// Hashes of every lowercased word n-gram of order 1..max_order, with repeats.
std::vector<std::uint64_t> ngram_hashes(std::string_view text, unsigned max_order);

// Logistic model over n-gram counts. The vocabulary is the sorted list of
// n-gram hashes seen in training; weights[i] belongs to vocabulary[i].
// N-grams outside the vocabulary contribute nothing.
struct QualityClassifier {
  std::string model_id;
  ClassifierHyper hyper;
  TrainingMeta meta;
  std::vector<std::uint64_t> vocabulary;
  Eigen::VectorXd weights;
  double bias = 0.0;

  double score(std::string_view text) const;

  bool operator==(const QualityClassifier& o) const {
    return model_id == o.model_id && hyper == o.hyper && meta == o.meta && vocabulary == o.vocabulary &&
           weights.size() == o.weights.size() && (weights.array() == o.weights.array()).all() && bias == o.bias;
  }
};

/// Seeded SGD on the logistic loss. Throws ValidationError if either class is empty.
QualityClassifier train_classifier(std::span<const Document> positives, std::span<const Document> negatives,
                                   const ClassifierHyper& hyper, std::string model_id, std::string source = {});

/// Fraction of (positives ∪ negatives) classified correctly at the 0.5 cut.
double classifier_accuracy(const QualityClassifier& clf, std::span<const Document> positives,
                           std::span<const Document> negatives);

inline double score(const QualityClassifier& clf, const Document& doc) { return clf.score(doc.text); }

// Binary format, little-endian throughout:
//   "QCLF" u32:version=1
//   str:model_id  u32:max_order u64:max_vocab u32:epochs f64:learning_rate u64:seed
//   str:source f64:train_accuracy
//   u64:vocab_size  u64[vocab_size]:ngram hashes (ascending)
//   f64:bias  f64[vocab_size]:weights
// where str is u32 byte length followed by UTF-8 bytes.
void save_classifier(std::ostream& out, const QualityClassifier& clf);
QualityClassifier load_classifier(std::istream& in);
void save_classifier(const std::filesystem::path& path, const QualityClassifier& clf);
QualityClassifier load_classifier(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Annotation
// ---------------------------------------------------------------------------

/// Named, independent per-document signals. Never collapsed into one score.
struct QualitySignalVector {
  std::map<std::string, double> values;

  double at(const std::string& name) const;
  bool contains(const std::string& name) const { return values.contains(name); }
  bool operator==(const QualitySignalVector&) const = default;
};

inline const char* const kRequiredSignals[] = {"freq:occurrence", "freq:snapshot", "freq:domain", "tag:code",
                                               "tag:math"};

struct AnnotationConfig {
  HeuristicThresholds heuristics;
  double tag_threshold = 0.5;
};

struct AnnotatedDocument {
  Document doc;
  QualitySignalVector signals;

  bool operator==(const AnnotatedDocument&) const = default;
};

struct DropRecord {
  std::string doc_id;
  std::vector<std::string> reasons;

  bool operator==(const DropRecord&) const = default;
};

struct AnnotatedCorpus {
  std::vector<AnnotatedDocument> documents;  // ascending doc_id
  std::vector<DropRecord> dropped;           // ascending doc_id
  std::size_t input_count = 0;               // retained documents examined
};

// Every retained document is run through the heuristics; survivors get one
// "clf:<model_id>" per ensemble member, the cluster's freq:* counts, and
// tag:<name> = 1 iff the domain classifier scores >= tag_threshold. Domain
// classifiers must cover at least "code" and "math". Throws PhaseError when a
// document has no cluster (dedup has not run).
AnnotatedCorpus annotate(const Corpus& corpus, std::span<const DuplicateCluster> clusters,
                         std::span<const QualityClassifier> ensemble,
                         const std::map<std::string, QualityClassifier>& domain_classifiers,
                         const AnnotationConfig& cfg = {}, unsigned workers = 1);

std::string annotated_to_json(const AnnotatedDocument& doc);
AnnotatedDocument annotated_from_json(std::string_view line);
void write_annotated(const std::filesystem::path& path, std::span<const AnnotatedDocument> docs);
std::vector<AnnotatedDocument> read_annotated(const std::filesystem::path& path);
void write_drop_report(const std::filesystem::path& path, std::span<const DropRecord> drops);
std::vector<DropRecord> read_drop_report(const std::filesystem::path& path);

}  // namespace curate
