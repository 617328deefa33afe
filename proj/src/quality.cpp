#include "curate/quality.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "curate/error.hpp"
#include "curate/parallel.hpp"
#include "curate/rng.hpp"
#include "curate/text.hpp"
#include "json.hpp"

namespace curate {

using nlohmann::json;
using nlohmann::ordered_json;

HeuristicStats heuristic_stats(std::string_view body) {
  HeuristicStats stats;
  const auto words = text::split_words(body);
  stats.word_count = words.size();
  if (!words.empty()) {
    std::size_t chars = 0;
    for (auto w : words) chars += text::count_code_points(w);
    stats.mean_word_length = static_cast<double>(chars) / static_cast<double>(words.size());
  }
  const auto counts = text::count_chars(body);
  if (counts.non_space > 0)
    stats.alpha_ratio = static_cast<double>(counts.alphabetic) / static_cast<double>(counts.non_space);

  std::unordered_map<std::string_view, std::size_t> line_counts;
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    auto line = text::trim(body.substr(pos, nl - pos));
    if (!line.empty()) {
      lines.push_back(line);
      ++line_counts[line];
    }
    pos = nl + 1;
  }
  if (!lines.empty()) {
    std::size_t repeated = 0;
    for (auto line : lines) repeated += line_counts[line] > 1;
    stats.max_line_repeat_ratio = static_cast<double>(repeated) / static_cast<double>(lines.size());
  }
  return stats;
}

HeuristicReport heuristic_filter(const Document& doc, const HeuristicThresholds& t) {
  HeuristicReport report;
  report.stats = heuristic_stats(doc.text);
  const auto& s = report.stats;
  if (s.word_count < t.min_words) report.reasons.emplace_back("min_words");
  if (s.mean_word_length < t.min_mean_word_length || s.mean_word_length > t.max_mean_word_length)
    report.reasons.emplace_back("mean_word_length");
  if (s.alpha_ratio < t.min_alpha_ratio) report.reasons.emplace_back("alpha_ratio");
  if (s.max_line_repeat_ratio > t.max_line_repeat_ratio) report.reasons.emplace_back("line_repeat");
  report.verdict = report.reasons.empty() ? Verdict::keep : Verdict::drop;
  return report;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kNgramSeed = 0x71c1a55ULL;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

using SparseRow = std::vector<std::pair<std::size_t, double>>;

SparseRow featurize(std::string_view body, const std::vector<std::uint64_t>& vocabulary, unsigned max_order) {
  auto hashes = ngram_hashes(body, max_order);
  std::sort(hashes.begin(), hashes.end());
  SparseRow row;
  for (std::size_t i = 0; i < hashes.size();) {
    std::size_t j = i;
    while (j < hashes.size() && hashes[j] == hashes[i]) ++j;
    auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), hashes[i]);
    if (it != vocabulary.end() && *it == hashes[i])
      row.emplace_back(static_cast<std::size_t>(it - vocabulary.begin()), static_cast<double>(j - i));
    i = j;
  }
  return row;
}

double linear_score(const SparseRow& row, const Eigen::VectorXd& weights, double bias) {
  double z = bias;
  for (auto [idx, count] : row) z += weights[static_cast<Eigen::Index>(idx)] * count;
  return sigmoid(z);
}

}  // namespace

std::vector<std::uint64_t> ngram_hashes(std::string_view body, unsigned max_order) {
  const std::string lowered = text::to_lower(body);
  const auto words = text::split_words(lowered);
  std::vector<std::uint64_t> out;
  out.reserve(words.size() * max_order);
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string gram(words[i]);
    out.push_back(hash64(gram, kNgramSeed));
    for (unsigned order = 2; order <= max_order && i + order <= words.size(); ++order) {
      gram.push_back(' ');
      gram.append(words[i + order - 1]);
      out.push_back(hash64(gram, kNgramSeed));
    }
  }
  return out;
}

double QualityClassifier::score(std::string_view body) const {
  return linear_score(featurize(body, vocabulary, hyper.max_order), weights, bias);
}

QualityClassifier train_classifier(std::span<const Document> positives, std::span<const Document> negatives,
                                   const ClassifierHyper& hyper, std::string model_id, std::string source) {
  if (positives.empty() || negatives.empty())
    throw ValidationError("train_classifier: both positive and negative sets must be non-empty");
  if (hyper.max_order < 1) throw ValidationError("train_classifier: max_order must be >= 1");

  std::unordered_map<std::uint64_t, std::size_t> freq;
  auto count_doc = [&](const Document& d) {
    for (auto h : ngram_hashes(d.text, hyper.max_order)) ++freq[h];
  };
  for (const auto& d : positives) count_doc(d);
  for (const auto& d : negatives) count_doc(d);

  std::vector<std::pair<std::uint64_t, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  if (ranked.size() > hyper.max_vocab) ranked.resize(hyper.max_vocab);

  QualityClassifier clf;
  clf.model_id = std::move(model_id);
  clf.hyper = hyper;
  clf.meta.source = std::move(source);
  clf.vocabulary.reserve(ranked.size());
  for (const auto& [h, _] : ranked) clf.vocabulary.push_back(h);
  std::sort(clf.vocabulary.begin(), clf.vocabulary.end());
  clf.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(clf.vocabulary.size()));

  std::vector<std::pair<SparseRow, double>> examples;
  examples.reserve(positives.size() + negatives.size());
  for (const auto& d : positives) examples.emplace_back(featurize(d.text, clf.vocabulary, hyper.max_order), 1.0);
  for (const auto& d : negatives) examples.emplace_back(featurize(d.text, clf.vocabulary, hyper.max_order), 0.0);

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(hyper.seed);
  for (unsigned epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t i : order) {
      const auto& [row, label] = examples[i];
      const double g = linear_score(row, clf.weights, clf.bias) - label;
      for (auto [idx, count] : row) clf.weights[static_cast<Eigen::Index>(idx)] -= hyper.learning_rate * g * count;
      clf.bias -= hyper.learning_rate * g;
    }
  }

  std::size_t correct = 0;
  for (const auto& [row, label] : examples) correct += (linear_score(row, clf.weights, clf.bias) >= 0.5) == (label > 0.5);
  clf.meta.train_accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  return clf;
}

double classifier_accuracy(const QualityClassifier& clf, std::span<const Document> positives,
                           std::span<const Document> negatives) {
  const std::size_t total = positives.size() + negatives.size();
  if (total == 0) return 0.0;
  std::size_t correct = 0;
  for (const auto& d : positives) correct += clf.score(d.text) >= 0.5;
  for (const auto& d : negatives) correct += clf.score(d.text) < 0.5;
  return static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'Q', 'C', 'L', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}
void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void read_exact(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw IntegrityError("classifier file truncated");
}
std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }
std::string get_str(std::istream& in) {
  std::string s(get_u32(in), '\0');
  read_exact(in, s.data(), s.size());
  return s;
}

}  // namespace

void save_classifier(std::ostream& out, const QualityClassifier& clf) {
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_str(out, clf.model_id);
  put_u32(out, clf.hyper.max_order);
  put_u64(out, clf.hyper.max_vocab);
  put_u32(out, clf.hyper.epochs);
  put_f64(out, clf.hyper.learning_rate);
  put_u64(out, clf.hyper.seed);
  put_str(out, clf.meta.source);
  put_f64(out, clf.meta.train_accuracy);
  put_u64(out, clf.vocabulary.size());
  for (auto h : clf.vocabulary) put_u64(out, h);
  put_f64(out, clf.bias);
  for (Eigen::Index i = 0; i < clf.weights.size(); ++i) put_f64(out, clf.weights[i]);
  if (!out) throw Error("failed writing classifier");
}

QualityClassifier load_classifier(std::istream& in) {
  char magic[4];
  read_exact(in, magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw IntegrityError("not a classifier file (bad magic)");
  if (auto v = get_u32(in); v != kVersion)
    throw IntegrityError("unsupported classifier version " + std::to_string(v));
  QualityClassifier clf;
  clf.model_id = get_str(in);
  clf.hyper.max_order = get_u32(in);
  clf.hyper.max_vocab = get_u64(in);
  clf.hyper.epochs = get_u32(in);
  clf.hyper.learning_rate = get_f64(in);
  clf.hyper.seed = get_u64(in);
  clf.meta.source = get_str(in);
  clf.meta.train_accuracy = get_f64(in);
  const std::uint64_t n = get_u64(in);
  if (n > (std::uint64_t{1} << 32)) throw IntegrityError("classifier vocabulary size implausible");
  clf.vocabulary.resize(n);
  for (auto& h : clf.vocabulary) h = get_u64(in);
  if (!std::is_sorted(clf.vocabulary.begin(), clf.vocabulary.end()))
    throw IntegrityError("classifier vocabulary not sorted");
  clf.bias = get_f64(in);
  clf.weights.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < clf.weights.size(); ++i) clf.weights[i] = get_f64(in);
  return clf;
}

void save_classifier(const std::filesystem::path& path, const QualityClassifier& clf) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  save_classifier(out, clf);
}

QualityClassifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open classifier " + path.string());
  return load_classifier(in);
}

// ---------------------------------------------------------------------------

double QualitySignalVector::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw ValidationError("signal not present: " + name);
  return it->second;
}

AnnotatedCorpus annotate(const Corpus& corpus, std::span<const DuplicateCluster> clusters,
                         std::span<const QualityClassifier> ensemble,
                         const std::map<std::string, QualityClassifier>& domain_classifiers,
                         const AnnotationConfig& cfg, unsigned workers) {
  for (const char* tag : {"code", "math"})
    if (!domain_classifiers.contains(tag))
      throw ValidationError(std::string("annotate: missing domain classifier for tag '") + tag + "'");
  {
    std::vector<std::string> ids;
    for (const auto& clf : ensemble) ids.push_back(clf.model_id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw ValidationError("annotate: duplicate model_id in classifier ensemble");
  }

  std::vector<const DuplicateCluster*> owner(corpus.size(), nullptr);
  for (const auto& c : clusters) {
    for (const auto& id : c.member_ids) {
      auto i = corpus.index_of(id);
      if (i == std::string_view::npos) throw PhaseError("quality", "cluster references unknown doc_id " + id);
      owner[i] = &c;
    }
  }
  std::vector<std::size_t> work;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!owner[i])
      throw PhaseError("quality", "document " + corpus.documents[i].doc_id +
                                      " has no cluster annotation; dedup must run first");
  }
  for (const auto& c : clusters)
    for (const auto& id : c.retained_ids) work.push_back(corpus.index_of(id));
  std::sort(work.begin(), work.end());

  struct Slot {
    bool keep = false;
    QualitySignalVector signals;
    std::vector<std::string> reasons;
  };
  std::vector<Slot> slots(work.size());
  parallel_for(work.size(), workers, [&](std::size_t w) {
    const Document& doc = corpus.documents[work[w]];
    auto report = heuristic_filter(doc, cfg.heuristics);
    auto& slot = slots[w];
    if (report.verdict == Verdict::drop) {
      slot.reasons = std::move(report.reasons);
      return;
    }
    slot.keep = true;
    for (const auto& clf : ensemble) slot.signals.values["clf:" + clf.model_id] = clf.score(doc.text);
    const auto& sig = owner[work[w]]->signals;
    slot.signals.values["freq:occurrence"] = static_cast<double>(sig.occurrence_count);
    slot.signals.values["freq:snapshot"] = static_cast<double>(sig.snapshot_count);
    slot.signals.values["freq:domain"] = static_cast<double>(sig.domain_count);
    for (const auto& [tag, clf] : domain_classifiers)
      slot.signals.values["tag:" + tag] = clf.score(doc.text) >= cfg.tag_threshold ? 1.0 : 0.0;
  });

  AnnotatedCorpus out;
  out.input_count = work.size();
  for (std::size_t w = 0; w < work.size(); ++w) {
    const Document& doc = corpus.documents[work[w]];
    if (slots[w].keep) out.documents.push_back({doc, std::move(slots[w].signals)});
    else out.dropped.push_back({doc.doc_id, std::move(slots[w].reasons)});
  }
  return out;
}

std::string annotated_to_json(const AnnotatedDocument& doc) {
  auto j = ordered_json::parse(document_to_json(doc.doc));
  j["signals"] = doc.signals.values;
  return j.dump();
}

AnnotatedDocument annotated_from_json(std::string_view line) {
  AnnotatedDocument out;
  out.doc = document_from_json(line);
  json j = json::parse(line);
  out.signals.values = j.at("signals").get<std::map<std::string, double>>();
  return out;
}

void write_annotated(const std::filesystem::path& path, std::span<const AnnotatedDocument> docs) {
  std::string body;
  for (const auto& d : docs) {
    body += annotated_to_json(d);
    body.push_back('\n');
  }
  write_file(path, body);
}

std::vector<AnnotatedDocument> read_annotated(const std::filesystem::path& path) {
  std::vector<AnnotatedDocument> docs;
  for (const auto& line : read_lines(path))
    if (!line.empty()) docs.push_back(annotated_from_json(line));
  return docs;
}

void write_drop_report(const std::filesystem::path& path, std::span<const DropRecord> drops) {
  std::string body;
  for (const auto& d : drops) {
    ordered_json j;
    j["doc_id"] = d.doc_id;
    j["reasons"] = d.reasons;
    body += j.dump();
    body.push_back('\n');
  }
  write_file(path, body);
}

std::vector<DropRecord> read_drop_report(const std::filesystem::path& path) {
  std::vector<DropRecord> drops;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    drops.push_back({j.at("doc_id").get<std::string>(), j.at("reasons").get<std::vector<std::string>>()});
  }
  return drops;
}

}  // namespace curate
