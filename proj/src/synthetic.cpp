#include "curate/synthetic.hpp"

#include <algorithm>
#include <set>

#include "curate/dedup.hpp"
#include "curate/error.hpp"
#include "curate/rng.hpp"
#include "json.hpp"

namespace curate {

namespace {

std::vector<std::string> word_pool(std::size_t n, std::uint64_t seed, std::size_t min_len, std::size_t max_len,
                                   const std::set<std::string>& avoid = {}) {
  Rng rng(seed);
  std::set<std::string> seen(avoid);
  std::vector<std::string> out;
  while (out.size() < n) {
    const std::size_t len = min_len + rng.below(max_len - min_len + 1);
    std::string w;
    for (std::size_t i = 0; i < len; ++i) w.push_back(static_cast<char>('a' + rng.below(26)));
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

struct Pools {
  std::vector<std::string> good, spam, code, math;
};

const Pools& pools() {
  static const Pools p = [] {
    Pools p;
    p.code = {"def",    "return", "class",  "import", "lambda", "while",  "elif",   "struct", "template",
              "const",  "static", "void",   "int",    "float",  "println", "printf", "self",   "async",
              "await",  "yield",  "namespace", "typedef", "malloc", "nullptr", "foreach", "iterator", "vector",
              "string", "boolean", "function", "var",  "let",    "module", "export", "interface", "override"};
    p.math = {"theorem", "lemma",   "proof",   "integral", "derivative", "matrix",  "eigenvalue", "polynomial",
              "equation", "corollary", "topology", "manifold", "vector", "scalar", "converges", "inequality",
              "hypothesis", "axiom", "isomorphism", "homomorphism", "bijection", "lemmas", "summation", "limit",
              "continuous", "differentiable", "orthogonal", "determinant", "prime", "modulo", "factorial", "series"};
    std::set<std::string> taken(p.code.begin(), p.code.end());
    taken.insert(p.math.begin(), p.math.end());
    p.good = word_pool(4000, 0x600d, 3, 9, taken);
    taken.insert(p.good.begin(), p.good.end());
    p.spam = word_pool(1500, 0x5ba3, 3, 9, taken);
    return p;
  }();
  return p;
}

std::string join_lines(const std::vector<std::string>& words, Rng& rng) {
  std::string out;
  std::size_t on_line = 0;
  std::size_t line_len = 8 + rng.below(10);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) {
      if (on_line >= line_len) {
        out.push_back('\n');
        on_line = 0;
        line_len = 8 + rng.below(10);
      } else {
        out.push_back(' ');
      }
    }
    out += words[i];
    ++on_line;
  }
  return out;
}

std::vector<std::string> synthetic_words(SyntheticKind kind, double quality, std::size_t n, Rng& rng) {
  const auto& p = pools();
  std::vector<std::string> words;
  words.reserve(n);
  if (kind == SyntheticKind::junk) {
    // Digit runs and a handful of repeated lines.
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.below(2) == 0)
        words.push_back(std::to_string(rng.below(100000)) + "$" + std::to_string(rng.below(1000)));
      else
        words.push_back(p.spam[rng.below(20)]);
    }
    return words;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    if (kind == SyntheticKind::code && u < 0.5)
      words.push_back(p.code[rng.below(p.code.size())]);
    else if (kind == SyntheticKind::math && u < 0.5)
      words.push_back(p.math[rng.below(p.math.size())]);
    else if (rng.uniform() < quality)
      words.push_back(p.good[rng.below(p.good.size())]);
    else
      words.push_back(p.spam[rng.below(p.spam.size())]);
  }
  return words;
}

std::string record(const std::string& text, std::size_t serial, std::size_t snapshot, std::size_t domain) {
  nlohmann::ordered_json j;
  j["url"] = "https://site" + std::to_string(domain) + ".example/page/" + std::to_string(serial);
  j["crawl_time"] = 1672531200 + static_cast<std::int64_t>(serial) * 37 + static_cast<std::int64_t>(snapshot) * 86400;
  j["snapshot_id"] = "S" + std::to_string(snapshot);
  j["language"] = "en";
  j["text"] = text;
  return j.dump();
}

SyntheticKind pick_kind(const SyntheticSpec& spec, Rng& rng) {
  const double u = rng.uniform();
  if (u < spec.junk_fraction) return SyntheticKind::junk;
  if (u < spec.junk_fraction + spec.code_fraction) return SyntheticKind::code;
  if (u < spec.junk_fraction + spec.code_fraction + spec.math_fraction) return SyntheticKind::math;
  return SyntheticKind::prose;
}

}  // namespace

std::size_t SyntheticCorpus::planted_clusters() const {
  return lines.size() - near_pairs.size() - 2 * exact_triples.size();
}

std::string synthetic_text(SyntheticKind kind, double quality, std::size_t words, std::uint64_t seed) {
  Rng rng(seed);
  return join_lines(synthetic_words(kind, quality, words, rng), rng);
}

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  const std::size_t dup_lines = 2 * spec.near_duplicate_pairs + 3 * spec.exact_triples;
  if (spec.documents < dup_lines) throw ValidationError("synthetic: too few documents for the planted duplicates");
  if (spec.min_words < 20 || spec.max_words < spec.min_words)
    throw ValidationError("synthetic: need 20 <= min_words <= max_words");
  if (spec.snapshots == 0 || spec.domains == 0) throw ValidationError("synthetic: snapshots and domains must be > 0");

  Rng rng(spec.seed);
  SyntheticCorpus out;
  const auto& p = pools();
  std::size_t serial = 0;
  auto emit = [&](const std::string& text, SyntheticKind kind, double q) {
    const std::size_t snapshot = rng.below(spec.snapshots);
    const std::size_t domain = rng.below(spec.domains);
    out.lines.push_back(record(text, serial++, snapshot, domain));
    out.kinds.push_back(kind);
    out.quality.push_back(q);
    return out.lines.size() - 1;
  };
  auto fresh = [&](SyntheticKind kind, double q) {
    const std::size_t n = spec.min_words + rng.below(spec.max_words - spec.min_words + 1);
    return synthetic_words(kind, q, n, rng);
  };

  // Planted near-duplicate pairs: the copy swaps a few spaced-out words for
  // fresh ones, backing off until the shingle Jaccard clears the bar.
  for (std::size_t i = 0; i < spec.near_duplicate_pairs; ++i) {
    // Junk would be dropped by the heuristics; plant among real text only.
    SyntheticKind kind = pick_kind(spec, rng);
    if (kind == SyntheticKind::junk) kind = SyntheticKind::prose;
    const double q = rng.uniform();
    const auto words = fresh(kind, q);
    const auto base = join_lines(words, rng);
    const auto base_set = shingle(base, 5);
    std::size_t edits = 1 + rng.below(3);
    std::string copy;
    for (;; --edits) {
      auto w = words;
      const std::size_t stride = w.size() / (edits + 1);
      for (std::size_t e = 1; e <= edits; ++e) w[e * stride] = p.good[rng.below(p.good.size())];
      Rng layout(spec.seed ^ i);
      copy = join_lines(w, layout);
      const double j = jaccard(base_set, shingle(copy, 5));
      if (j >= spec.near_duplicate_jaccard && copy != base) break;
      if (edits == 1) throw Error("synthetic: could not plant a near duplicate; raise min_words");
    }
    const auto a = emit(base, kind, q);
    const auto b = emit(copy, kind, q);
    out.near_pairs.emplace_back(a, b);
  }

  for (std::size_t i = 0; i < spec.exact_triples; ++i) {
    SyntheticKind kind = pick_kind(spec, rng);
    if (kind == SyntheticKind::junk) kind = SyntheticKind::prose;
    const double q = rng.uniform();
    const auto text = join_lines(fresh(kind, q), rng);
    std::array<std::size_t, 3> t{};
    for (auto& slot : t) slot = emit(text, kind, q);
    out.exact_triples.push_back(t);
  }

  while (out.lines.size() < spec.documents) {
    const auto kind = pick_kind(spec, rng);
    const double q = rng.uniform();
    auto words = fresh(kind, q);
    std::string text;
    if (kind == SyntheticKind::junk) {
      // Repeat one line so the repetition check also fires.
      const auto line = join_lines(std::vector<std::string>(words.begin(), words.begin() + 6), rng);
      for (int r = 0; r < 6; ++r) text += line + "\n";
      text += join_lines(words, rng);
    } else {
      text = join_lines(words, rng);
    }
    emit(text, kind, q);
  }

  // Interleave so planted duplicates are not adjacent in the input file.
  std::vector<std::size_t> order(out.lines.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::vector<std::size_t> where(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) where[order[i]] = i;

  SyntheticCorpus shuffled;
  for (auto i : order) {
    shuffled.lines.push_back(std::move(out.lines[i]));
    shuffled.kinds.push_back(out.kinds[i]);
    shuffled.quality.push_back(out.quality[i]);
  }
  for (auto [a, b] : out.near_pairs) shuffled.near_pairs.emplace_back(where[a], where[b]);
  for (auto t : out.exact_triples) shuffled.exact_triples.push_back({where[t[0]], where[t[1]], where[t[2]]});
  return shuffled;
}

TrainingSet synthetic_training_set(const std::string& task, std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSet set;
  auto make = [&](SyntheticKind kind, double q, const char* label, std::size_t i) {
    Document d;
    d.doc_id = std::string(label) + "-" + std::to_string(i);
    const std::size_t n = 40 + rng.below(80);
    d.text = synthetic_text(kind, q, n, rng.next());
    return d;
  };
  for (std::size_t i = 0; i < per_class; ++i) {
    if (task == "quality") {
      set.positives.push_back(make(SyntheticKind::prose, 1.0, "pos", i));
      set.negatives.push_back(make(SyntheticKind::prose, 0.0, "neg", i));
    } else if (task == "code" || task == "math") {
      const auto kind = task == "code" ? SyntheticKind::code : SyntheticKind::math;
      set.positives.push_back(make(kind, rng.uniform(), "pos", i));
      set.negatives.push_back(make(SyntheticKind::prose, rng.uniform(), "neg", i));
    } else if (task == "same") {
      set.positives.push_back(make(SyntheticKind::prose, 0.5, "pos", i));
      set.negatives.push_back(make(SyntheticKind::prose, 0.5, "neg", i));
    } else {
      throw ValidationError("synthetic: unknown training task '" + task + "'");
    }
  }
  return set;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::string all;
  for (const auto& l : lines) all += l + "\n";
  write_file(path, all);
}

}  // namespace curate
