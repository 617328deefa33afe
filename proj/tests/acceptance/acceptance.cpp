// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "curate/config.hpp"
#include "curate/curriculum.hpp"
#include "curate/dedup.hpp"
#include "curate/pipeline.hpp"
#include "curate/quality.hpp"
#include "curate/rng.hpp"
#include "curate/sampling.hpp"
#include "curate/synthetic.hpp"
#include "curate/train_prep.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace curate;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("curate_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

// Shingles hashed with std::hash, independent of the library's hashing.
std::vector<std::size_t> oracle_shingle_hashes(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& s : oracle::shingles(text, 5)) out.push_back(std::hash<std::string>{}(s));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double sorted_jaccard(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) ++i;
    else if (b[j] < a[i]) ++j;
    else ++inter, ++i, ++j;
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

struct DedupFixture {
  Corpus corpus;
  DedupResult result;
  double seconds = 0;
};

const DedupFixture& dedup_fixture() {
  static const DedupFixture f = [] {
    SyntheticSpec spec;
    spec.documents = 1000;
    spec.near_duplicate_pairs = 50;
    spec.exact_triples = 20;
    spec.seed = 101;
    DedupFixture out;
    const auto t0 = clock_type::now();
    out.corpus = ingest_lines(make_synthetic_corpus(spec).lines).corpus;
    out.result = deduplicate(out.corpus, DedupConfig{});
    out.seconds = seconds_since(t0);
    return out;
  }();
  return f;
}

// 1 ------------------------------------------------------------------------
Outcome dedup_oracle() {
  const auto& f = dedup_fixture();
  const auto& docs = f.corpus.documents;
  const std::size_t n = docs.size();
  std::vector<std::vector<std::size_t>> sh(n);
  for (std::size_t i = 0; i < n; ++i) sh[i] = oracle_shingle_hashes(docs[i].text);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::set<std::pair<std::size_t, std::size_t>> exact;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (docs[i].text == docs[j].text) exact.emplace(i, j);
      if (sorted_jaccard(sh[i], sh[j]) >= 0.8) edges.emplace_back(i, j);
    }
  const auto truth = oracle::components(n, edges);

  std::vector<std::size_t> predicted(n, n);
  for (std::size_t c = 0; c < f.result.clusters.size(); ++c)
    for (const auto& id : f.result.clusters[c].member_ids) predicted[f.corpus.index_of(id)] = c;

  std::size_t tp = 0, truth_pairs = 0, pred_pairs = 0, exact_hit = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool t = truth[i] == truth[j];
      const bool p = predicted[i] == predicted[j];
      truth_pairs += t;
      pred_pairs += p;
      tp += t && p;
    }
  for (auto [i, j] : exact) exact_hit += predicted[i] == predicted[j];
  const double recall = truth_pairs ? double(tp) / double(truth_pairs) : 1.0;
  const double precision = pred_pairs ? double(tp) / double(pred_pairs) : 1.0;
  const double exact_recall = exact.empty() ? 1.0 : double(exact_hit) / double(exact.size());
  const bool ok = recall >= 0.9 && precision >= 0.95 && exact_recall == 1.0 && f.seconds < 30.0;
  return {ok, fmt("recall=%.4f precision=%.4f exact_recall=%.4f oracle_pairs=%zu runtime=%.2fs", recall, precision,
                  exact_recall, truth_pairs, f.seconds)};
}

// 2 ------------------------------------------------------------------------
Outcome minhash_accuracy() {
  DedupConfig cfg;
  Rng rng(202);
  std::size_t good = 0;
  const std::size_t pairs = 200;
  double worst = 0;
  for (std::size_t k = 0; k < pairs; ++k) {
    const std::size_t shared = rng.below(300);
    const std::size_t only_a = rng.below(300), only_b = rng.below(300);
    std::set<std::uint64_t> a, b;
    while (a.size() < shared) {
      const auto x = rng.next();
      a.insert(x);
      b.insert(x);
    }
    while (a.size() < shared + only_a + 1) a.insert(rng.next());
    while (b.size() < shared + only_b + 1) b.insert(rng.next());
    const double exact = oracle::jaccard(a, b);
    ShingleSet sa{{a.begin(), a.end()}, 5}, sb{{b.begin(), b.end()}, 5};
    const double est = estimate_jaccard(minhash_signature(sa, cfg), minhash_signature(sb, cfg));
    worst = std::max(worst, std::abs(est - exact));
    good += std::abs(est - exact) <= 0.15;
  }
  const double frac = double(good) / double(pairs);
  return {frac >= 0.95, fmt("within_0.15=%.3f worst_error=%.4f P=128", frac, worst)};
}

// 3 ------------------------------------------------------------------------
Outcome frequency_signals_oracle() {
  const auto& f = dedup_fixture();
  std::size_t bad = 0;
  for (const auto& c : f.result.clusters) {
    std::set<std::string> snaps, doms;
    for (const auto& id : c.member_ids) {
      const auto* d = f.corpus.find(id);
      snaps.insert(d->snapshot_id);
      doms.insert(d->domain);
    }
    if (c.signals.occurrence_count != c.member_ids.size() || c.signals.snapshot_count != snaps.size() ||
        c.signals.domain_count != doms.size())
      ++bad;
  }
  return {bad == 0, fmt("clusters=%zu mismatches=%zu", f.result.clusters.size(), bad)};
}

// 4 ------------------------------------------------------------------------
Outcome top_k_retention() {
  const auto& f = dedup_fixture();
  const std::size_t k = DedupConfig{}.top_k;
  std::size_t bad = 0, multi = 0;
  for (const auto& c : f.result.clusters) {
    std::vector<const Document*> m;
    for (const auto& id : c.member_ids) m.push_back(f.corpus.find(id));
    std::sort(m.begin(), m.end(), [](const Document* a, const Document* b) {
      if (a->text.size() != b->text.size()) return a->text.size() > b->text.size();
      return a->doc_id < b->doc_id;
    });
    std::vector<std::string> want;
    for (std::size_t i = 0; i < std::min(k, m.size()); ++i) want.push_back(m[i]->doc_id);
    multi += c.member_ids.size() > 1;
    if (c.retained_ids.size() != std::min(k, c.member_ids.size()) || c.retained_ids != want) ++bad;
  }
  return {bad == 0, fmt("clusters=%zu multi_member=%zu mismatches=%zu k=%zu", f.result.clusters.size(), multi, bad, k)};
}

// 5 ------------------------------------------------------------------------
WeightMap wmap(const std::string& s, const std::vector<std::string>& ids, std::vector<double> w) {
  WeightMap m;
  m.signal = s;
  m.doc_ids = ids;
  m.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return m;
}

struct RandomMix {
  std::vector<WeightMap> maps;
  std::vector<double> lambdas;
};

RandomMix random_mix(Rng& rng) {
  const std::size_t k = 1 + rng.below(5), n = 1 + rng.below(60);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(fmt("d%05zu", i));
  RandomMix r;
  double sum = 0;
  for (std::size_t s = 0; s < k; ++s) {
    // Each signal covers a random subset of the documents.
    std::vector<std::string> sub;
    std::vector<double> w;
    for (const auto& id : ids)
      if (rng.below(3) != 0) {
        sub.push_back(id);
        w.push_back(rng.below(5) == 0 ? 0.0 : std::exp(rng.uniform() * 10 - 5));
      }
    if (sub.empty()) sub.push_back(ids[0]), w.push_back(0.0);
    w[rng.below(w.size())] = 1.0;
    r.maps.push_back(wmap(fmt("s%zu", s), sub, w));
    r.lambdas.push_back(rng.uniform() + 1e-3);
    sum += r.lambdas.back();
  }
  double head = 0;
  for (std::size_t s = 0; s + 1 < k; ++s) head += (r.lambdas[s] /= sum);
  r.lambdas.back() = 1.0 - head;
  return r;
}

Outcome merge_math() {
  Rng rng(505);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto mix = random_mix(rng);
    const auto p = merge_distributions(mix.maps, mix.lambdas);
    worst = std::max(worst, std::abs(p.probabilities.sum() - 1.0));
  }
  const std::vector<WeightMap> maps{wmap("uniform", {"d1", "d2"}, {1, 1}), wmap("point", {"d1"}, {1})};
  const std::vector<double> l{0.5, 0.5};
  const auto hand = merge_distributions(maps, l);
  const bool exact = hand.probability("d1") == 0.75 && hand.probability("d2") == 0.25;
  return {worst <= 1e-9 && exact, fmt("max|sum-1|=%.3g p(d1)=%.17g p(d2)=%.17g", worst, hand.probability("d1"),
                                      hand.probability("d2"))};
}

// 6 ------------------------------------------------------------------------
Outcome dominance_bound() {
  Rng rng(606);
  std::size_t checks = 0, violations = 0;
  double tightest = 0;
  for (int t = 0; t < 1000; ++t) {
    auto mix = random_mix(rng);
    if (mix.maps.size() < 2) continue;
    const auto p = merge_distributions(mix.maps, mix.lambdas);
    for (std::size_t drop = 0; drop < mix.maps.size(); ++drop) {
      std::vector<WeightMap> rest;
      std::vector<double> rl;
      for (std::size_t s = 0; s < mix.maps.size(); ++s)
        if (s != drop) rest.push_back(mix.maps[s]), rl.push_back(mix.lambdas[s] / (1.0 - mix.lambdas[drop]));
      double head = 0;
      for (std::size_t s = 0; s + 1 < rl.size(); ++s) head += rl[s];
      rl.back() = 1.0 - head;
      // Documents only the dropped signal covered have no mass left; the
      // remaining maps must still have some.
      double remaining = 0;
      for (const auto& m : rest) remaining += m.weights.sum();
      bool all_positive = true;
      for (const auto& m : rest) all_positive &= m.weights.sum() > 0;
      if (!all_positive || remaining <= 0) continue;
      const auto q = merge_distributions(rest, rl);
      for (const auto& id : p.doc_ids) {
        const double delta = std::abs(p.probability(id) - q.probability(id));
        ++checks;
        tightest = std::max(tightest, delta / mix.lambdas[drop]);
        if (delta > mix.lambdas[drop]) ++violations;
      }
    }
  }
  return {violations == 0 && checks > 0,
          fmt("checks=%zu violations=%zu max(delta/lambda)=%.6f", checks, violations, tightest)};
}

// 7 ------------------------------------------------------------------------
Outcome curriculum_budgets() {
  const std::uint64_t total = 8000000;
  const auto plan = four_stage_plan(total);
  const auto budgets = stage_budgets(plan);
  std::uint64_t sum = 0;
  for (auto b : budgets) sum += b;
  bool final_smallest = true, final_strictest = true;
  for (std::size_t i = 0; i + 1 < budgets.size(); ++i) {
    final_smallest &= budgets.back() < budgets[i];
    final_strictest &= plan.stages.back().quality_threshold > plan.stages[i].quality_threshold;
  }

  SyntheticSpec spec;
  spec.documents = 3000;
  spec.near_duplicate_pairs = 100;
  spec.exact_triples = 40;
  spec.seed = 707;
  const auto s = fixtures::make_desk_setup(scratch("budgets"), spec, total, 4);
  const auto rep = run(load_pipeline_config(s.config_path));
  bool within = rep.stages.size() == budgets.size();
  std::string per_stage;
  for (std::size_t i = 0; i < rep.stages.size() && within; ++i) {
    const auto& st = rep.stages[i];
    within &= st.budget == budgets[i] && st.emitted_tokens >= st.budget &&
              st.emitted_tokens < st.budget + st.max_doc_tokens;
    per_stage += fmt(" %s:%llu/%llu(+%llu<%llu)", st.stage_id.c_str(), (unsigned long long)st.emitted_tokens,
                     (unsigned long long)st.budget, (unsigned long long)(st.emitted_tokens - st.budget),
                     (unsigned long long)st.max_doc_tokens);
  }
  fs::remove_all(s.dir);
  const bool ok = sum == total && final_smallest && final_strictest && within;
  return {ok, fmt("sum=%llu final_smallest=%d final_strictest=%d", (unsigned long long)sum, final_smallest,
                  final_strictest) +
                  per_stage};
}

// 8 ------------------------------------------------------------------------
std::map<std::string, std::string> all_checksums(const fs::path& work) {
  std::map<std::string, std::string> out;
  for (auto phase : kPhases) {
    const auto j = nlohmann::json::parse(read_file(work / std::string(phase) / "phase.json"));
    for (const auto& [k, v] : j.at("outputs").items()) out[std::string(phase) + "/" + k] = v.get<std::string>();
  }
  return out;
}

Outcome determinism() {
  SyntheticSpec spec;
  spec.documents = 2000;
  spec.near_duplicate_pairs = 80;
  spec.exact_triples = 30;
  spec.seed = 808;
  const auto s = fixtures::make_desk_setup(scratch("determinism"), spec, 400000);
  auto cfg = load_pipeline_config(s.config_path);
  cfg.workers = 1;
  cfg.work_dir = s.dir / "w1";
  const auto a = run(cfg);
  cfg.workers = 8;
  cfg.work_dir = s.dir / "w8";
  const auto b = run(cfg);
  const auto ca = all_checksums(s.dir / "w1"), cb = all_checksums(s.dir / "w8");
  const bool same_files = ca == cb;
  const bool same_report = a.to_json(false) == b.to_json(false) &&
                           report(s.dir / "w1").to_json(false) == report(s.dir / "w8").to_json(false);
  fs::remove_all(s.dir);
  return {same_files && same_report,
          fmt("artifacts=%zu identical_checksums=%d identical_reports=%d", ca.size(), same_files, same_report)};
}

// 9 ------------------------------------------------------------------------
Outcome lr_schedule() {
  const LrScheduleSpec s{3e-4, 2000, 60000, 90000, 1e-4, 100000, 3e-6};
  Rng rng(909);
  double worst = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto t = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(s.end) + 1));
    const double want = oracle::lr(double(t), s.peak_lr, double(s.warmup_end), double(s.constant_end),
                                   double(s.slow_decay_end), s.slow_decay_lr, double(s.end), s.end_lr);
    const double got = lr_at(t, s);
    worst = std::max(worst, want == 0 ? std::abs(got) : std::abs(got - want) / std::abs(want));
  }
  const double bound = s.peak_lr * 2 / double(s.warmup_end);
  double max_jump = 0;
  bool monotone = true;
  for (std::int64_t t = 0; t < s.end; ++t) {
    max_jump = std::max(max_jump, std::abs(lr_at(t + 1, s) - lr_at(t, s)));
    if (t >= s.warmup_end) monotone &= lr_at(t + 1, s) <= lr_at(t, s);
  }
  return {worst <= 1e-12 && max_jump <= bound && monotone,
          fmt("max_rel_err=%.3g max_jump=%.3g (bound %.3g) non_increasing_after_warmup=%d", worst, max_jump, bound,
              monotone)};
}

// 10/12 --------------------------------------------------------------------
std::vector<TokenDocument> workload(Rng& rng, std::uint32_t L) {
  std::vector<TokenDocument> out;
  const std::size_t docs = 1 + rng.below(25);
  for (std::size_t d = 0; d < docs; ++d) {
    const std::size_t len = 1 + rng.below(rng.below(4) == 0 ? 3 * std::size_t(L) : L);
    TokenDocument t{fmt("doc%zu", d), {}};
    for (std::size_t i = 0; i < len; ++i) t.tokens.push_back(1 + std::uint32_t(rng.below(50000)));
    out.push_back(std::move(t));
  }
  return out;
}

Outcome mask_oracle() {
  Rng rng(1010);
  std::size_t cells = 0, mismatches = 0, packings = 0;
  while (packings < 100) {
    const auto L = std::uint32_t(1 + rng.below(512));
    const auto seqs = pack_documents(workload(rng, L), PackingPolicy{L, 0});
    for (const auto& s : seqs) {
      if (packings == 100) break;
      ++packings;
      std::vector<std::pair<std::uint32_t, std::uint32_t>> b;
      for (const auto& sp : s.spans) b.emplace_back(sp.begin, sp.end);
      const auto m = cross_doc_mask(s);
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < L; ++j, ++cells) mismatches += m(i, j) != oracle::mask(b, s.pad_from, i, j);
    }
  }
  return {mismatches == 0, fmt("packings=%zu cells=%zu mismatches=%zu", packings, cells, mismatches)};
}

Outcome packing_conservation() {
  Rng rng(1212);
  std::size_t bad = 0, overlong = 0;
  for (int w = 0; w < 100; ++w) {
    const auto L = std::uint32_t(1 + rng.below(4096));
    const auto docs = workload(rng, L);
    std::size_t in = 0;
    for (const auto& d : docs) in += d.tokens.size(), overlong += d.tokens.size() > L;
    std::size_t out = 0;
    for (const auto& s : pack_documents(docs, PackingPolicy{L, 0}))
      out += static_cast<std::size_t>(std::count_if(s.token_ids.begin(), s.token_ids.end(), [](auto t) { return t != 0; }));
    bad += in != out;
  }
  return {bad == 0 && overlong > 0, fmt("workloads=100 mismatches=%zu overlong_docs=%zu", bad, overlong)};
}

// 11 -----------------------------------------------------------------------
Outcome rope() {
  const bool exact = rope_config(RopeStage::pretrain).sequence_length == 4096 &&
                     rope_config(RopeStage::pretrain).theta == 1.0e4 &&
                     rope_config(RopeStage::ext1).sequence_length == 32768 &&
                     rope_config(RopeStage::ext1).theta == 8.0e6 &&
                     rope_config(RopeStage::ext2).sequence_length == 131072 &&
                     rope_config(RopeStage::ext2).theta == 1.28e8;
  Rng rng(1111);
  double worst_norm = 0, worst_ident = 0;
  for (auto stage : {RopeStage::pretrain, RopeStage::ext1, RopeStage::ext2}) {
    const auto cfg = rope_config(stage);
    for (int k = 0; k < 300; ++k) {
      Eigen::VectorXd v(cfg.head_dim);
      for (auto& x : v) x = rng.uniform() * 2 - 1;
      const auto m = std::int64_t(rng.below(cfg.sequence_length));
      worst_norm = std::max(worst_norm, std::abs(rope_rotate(v, m, cfg).norm() - v.norm()) / v.norm());
    }
  }
  const auto cfg = rope_config(RopeStage::ext2, 64);
  for (int k = 0; k < 1000; ++k) {
    Eigen::VectorXd q(64), kk(64);
    for (auto& x : q) x = rng.uniform() * 2 - 1;
    for (auto& x : kk) x = rng.uniform() * 2 - 1;
    const auto m = std::int64_t(rng.below(131072)), n = std::int64_t(rng.below(131072));
    const auto d = std::int64_t(rng.below(131072));
    const double lhs = rope_rotate(q, m, cfg).dot(rope_rotate(kk, n, cfg));
    const double rhs = rope_rotate(q, m + d, cfg).dot(rope_rotate(kk, n + d, cfg));
    worst_ident = std::max(worst_ident, std::abs(lhs - rhs));
  }
  return {exact && worst_norm <= 1e-9 && worst_ident <= 1e-6,
          fmt("exact_configs=%d max_rel_norm_err=%.3g max_identity_err=%.3g", exact, worst_norm, worst_ident)};
}

// 13 -----------------------------------------------------------------------
std::vector<Document> toy(const char* marker, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Document> out;
  for (std::size_t i = 0; i < n; ++i) {
    Document d;
    d.doc_id = fmt("%s-%llu-%zu", marker, (unsigned long long)seed, i);
    const std::size_t len = 15 + rng.below(20), at = rng.below(len);
    for (std::size_t k = 0; k < len; ++k)
      d.text += (k ? " " : "") + (k == at ? std::string(marker) : fmt("f%llu", (unsigned long long)rng.below(300)));
    out.push_back(std::move(d));
  }
  return out;
}

Outcome classifier_sanity() {
  const ClassifierHyper hyper;
  const auto clf = train_classifier(toy("alpha", 200, 1), toy("beta", 200, 2), hyper, "toy");
  const double held_out = classifier_accuracy(clf, toy("alpha", 200, 3), toy("beta", 200, 4));
  const auto same = toy("gamma", 200, 5);
  const auto flat = train_classifier(same, same, hyper, "same");
  const double same_acc = flat.meta.train_accuracy;
  return {held_out >= 0.95 && same_acc >= 0.4 && same_acc <= 0.6,
          fmt("separable_held_out=%.4f identical_class=%.4f", held_out, same_acc)};
}

// 14 -----------------------------------------------------------------------
Outcome end_to_end() {
  SyntheticSpec spec;
  spec.documents = 10000;
  spec.near_duplicate_pairs = 500;
  spec.exact_triples = 200;
  spec.seed = 1414;
  const auto s = fixtures::make_desk_setup(scratch("e2e"), spec, 2000000, 4);
  const auto cfg = load_pipeline_config(s.config_path);
  const auto t0 = clock_type::now();
  const auto rep = run(cfg);
  const double secs = seconds_since(t0);
  const auto failures = rep.reconciliation_failures();
  const double planted_rate = 1.0 - double(s.corpus.planted_clusters()) / double(spec.documents);
  // Missed near-duplicate pairs each add one cluster; exact copies are never missed.
  const double lowest_rate = 1.0 - double(s.corpus.planted_clusters() + spec.near_duplicate_pairs) / double(spec.documents);
  const bool rate_ok = rep.duplicate_rate <= planted_rate + 1e-12 && rep.duplicate_rate >= lowest_rate;
  bool all_present = true;
  for (auto phase : kPhases) all_present &= rep.present.at(std::string(phase));
  fs::remove_all(s.dir);
  return {failures.empty() && secs < 120.0 && all_present && rate_ok,
          fmt("runtime=%.2fs reconciliation_failures=%zu duplicate_rate=%.4f planted=%.4f clusters=%zu", secs,
              failures.size(), rep.duplicate_rate, planted_rate, rep.clusters)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"dedup oracle equivalence", dedup_oracle},
      {"minhash accuracy", minhash_accuracy},
      {"frequency signals", frequency_signals_oracle},
      {"top-k retention", top_k_retention},
      {"merge math", merge_math},
      {"dominance bound", dominance_bound},
      {"curriculum budgets", curriculum_budgets},
      {"determinism across worker counts", determinism},
      {"lr schedule", lr_schedule},
      {"cross-document mask", mask_oracle},
      {"rope", rope},
      {"packing conservation", packing_conservation},
      {"classifier sanity", classifier_sanity},
      {"end-to-end desk run", end_to_end},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = clock_type::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
