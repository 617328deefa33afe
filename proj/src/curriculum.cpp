#include "curate/curriculum.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "curate/error.hpp"
#include "curate/parallel.hpp"
#include "curate/text.hpp"
#include "json.hpp"

namespace curate {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::vector<PlanViolation> plan_violations(const StagePlan& plan) {
  std::vector<PlanViolation> out;
  const auto& st = plan.stages;
  if (st.empty()) {
    out.push_back({"empty_plan", "plan has no stages"});
    return out;
  }
  if (plan.total_token_budget == 0) out.push_back({"budget_nonpositive", "total_token_budget must be > 0"});

  std::set<std::string> ids;
  double share_sum = 0.0;
  for (const auto& s : st) {
    if (!ids.insert(s.stage_id).second) out.push_back({"duplicate_stage_id", "stage id repeated: " + s.stage_id});
    if (!(s.token_share > 0.0 && s.token_share < 1.0))
      out.push_back({"share_out_of_range", "stage " + s.stage_id + " token_share must be in (0,1)"});
    share_sum += s.token_share;
    if (s.gating_signal.empty()) out.push_back({"missing_gate", "stage " + s.stage_id + " has no gating signal"});
    if (!s.mixture.empty()) {
      double m = 0.0;
      bool bad = false;
      for (const auto& [tag, frac] : s.mixture) {
        if (!(frac >= 0.0 && frac <= 1.0)) bad = true;
        m += frac;
      }
      if (bad || std::abs(m - 1.0) > 1e-9)
        out.push_back({"mixture_not_unit", "stage " + s.stage_id + " mixture fractions must sum to 1"});
    }
  }
  if (std::abs(share_sum - 1.0) > 1e-9) out.push_back({"shares_not_unit", "shares ≠ 1"});

  for (std::size_t i = 1; i < st.size(); ++i)
    if (st[i].quality_threshold < st[i - 1].quality_threshold)
      out.push_back({"thresholds_decreasing", "quality_threshold decreases at stage " + st[i].stage_id});

  const auto& last = st.back();
  for (std::size_t i = 0; i + 1 < st.size(); ++i) {
    if (!(last.token_share < st[i].token_share)) {
      out.push_back({"final_not_smallest", "final stage must be smallest"});
      break;
    }
  }
  for (std::size_t i = 0; i + 1 < st.size(); ++i) {
    if (!(last.quality_threshold > st[i].quality_threshold)) {
      out.push_back({"final_not_strictest", "final stage must have the strictest quality threshold"});
      break;
    }
  }
  return out;
}

const StagePlan& validate_plan(const StagePlan& plan) {
  auto violations = plan_violations(plan);
  if (!violations.empty()) {
    std::vector<std::string> msgs;
    for (const auto& v : violations) msgs.push_back(v.name + ": " + v.message);
    throw ValidationError(std::move(msgs));
  }
  return plan;
}

std::vector<std::uint64_t> stage_budgets(const StagePlan& plan) {
  const std::size_t n = plan.stages.size();
  std::vector<std::uint64_t> budgets(n, 0);
  if (n == 0) return budgets;
  long double share_sum = 0;
  for (const auto& s : plan.stages) share_sum += s.token_share;
  if (!(share_sum > 0)) throw ValidationError("stage shares must be positive");

  std::vector<long double> remainder(n);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double quota =
        static_cast<long double>(plan.stages[i].token_share) / share_sum * static_cast<long double>(plan.total_token_budget);
    const long double fl = std::floor(quota);
    budgets[i] = static_cast<std::uint64_t>(fl);
    remainder[i] = quota - fl;
    assigned += budgets[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (assigned < plan.total_token_budget) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::uint64_t k = 0; assigned < plan.total_token_budget; ++k, ++assigned) ++budgets[order[k % n]];
  } else {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] < remainder[b]; });
    for (std::uint64_t k = 0; assigned > plan.total_token_budget; ++k) {
      auto& b = budgets[order[k % n]];
      if (b > 0) --b, --assigned;
    }
  }
  return budgets;
}

StagePlan four_stage_plan(std::uint64_t total_token_budget) {
  StagePlan plan;
  plan.total_token_budget = total_token_budget;
  plan.stages = {
      {"i", "PL-heavy data for ease of learning", 0.15, 0.0, std::string(kMaxClassifierGate),
       {{"code", 0.7}, {"other", 0.3}}},
      {"ii", "PL+NL mixture with high diversity", 0.45, 0.0, std::string(kMaxClassifierGate),
       {{"code", 0.4}, {"other", 0.6}}},
      {"iii", "PL+NL mixture shifting towards high quality", 0.30, 0.5, std::string(kMaxClassifierGate),
       {{"code", 0.4}, {"other", 0.6}}},
      {"iv", "PL+NL highest-quality annealing", 0.10, 0.9, std::string(kMaxClassifierGate),
       {{"code", 0.4}, {"other", 0.6}}},
  };
  return plan;
}

double gating_value(const QualitySignalVector& signals, const std::string& gate) {
  if (gate == kMaxClassifierGate) {
    bool any = false;
    double best = 0.0;
    for (const auto& [name, v] : signals.values) {
      if (!name.starts_with("clf:")) continue;
      best = any ? std::max(best, v) : v;
      any = true;
    }
    if (!any) throw ValidationError("gating signal max:clf needs at least one clf:* signal");
    return best;
  }
  return signals.at(gate);
}

std::vector<std::size_t> stage_eligible(std::span<const AnnotatedDocument> docs, const StageSpec& stage) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < docs.size(); ++i)
    if (gating_value(docs[i].signals, stage.gating_signal) >= stage.quality_threshold) out.push_back(i);
  return out;
}

std::string stratum_of(const QualitySignalVector& signals, const std::map<std::string, double>& mixture) {
  if (mixture.empty()) return "all";
  for (const auto& [tag, _] : mixture) {
    if (tag == "other") continue;
    auto it = signals.values.find("tag:" + tag);
    if (it == signals.values.end()) throw ValidationError("mixture tag has no signal: tag:" + tag);
    if (it->second >= 0.5) return tag;
  }
  return mixture.contains("other") ? "other" : std::string{};
}

std::vector<std::uint32_t> WhitespaceTokenizer::encode(std::string_view body) const {
  std::vector<std::uint32_t> ids;
  for (auto w : text::split_words(body))
    ids.push_back(1 + static_cast<std::uint32_t>(hash64(w) % (vocab_size_ - 1)));
  return ids;
}

std::uint64_t stage_seed(std::uint64_t master_seed, std::string_view stage_id) {
  return hash_combine(master_seed, hash64(stage_id));
}

namespace {

void append_number(std::string& out, std::uint64_t v) {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

std::string shard_name(const std::string& stage_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return "stage-" + stage_id + "-" + buf + ".jsonl";
}

}  // namespace

ShardManifest emit_stage(const StageSpec& stage, std::uint64_t budget, std::span<const AnnotatedDocument> eligible,
                         const MergedDistribution& dist, std::span<const DuplicateCluster> clusters,
                         const Tokenizer& tokenizer, std::uint64_t seed, const fs::path& out_dir,
                         const EmitOptions& options, unsigned workers) {
  if (eligible.empty()) throw PhaseError("curriculum", "stage " + stage.stage_id + " has no eligible documents");
  if (budget == 0) throw PhaseError("curriculum", "stage " + stage.stage_id + " has a zero budget");

  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < eligible.size(); ++i) index.emplace(eligible[i].doc.doc_id, i);

  std::vector<std::string> stratum(eligible.size());
  for (std::size_t i = 0; i < eligible.size(); ++i) stratum[i] = stratum_of(eligible[i].signals, stage.mixture);

  std::map<std::string, double> targets;
  if (stage.mixture.empty()) targets["all"] = 1.0;
  else
    for (const auto& [tag, frac] : stage.mixture)
      if (frac > 0.0) targets[tag] = frac;

  std::vector<std::string> names;
  std::vector<double> target_tokens;
  std::vector<ClusterSampler> samplers;
  for (const auto& [name, frac] : targets) {
    std::function<bool(const std::string&)> keep = [&, name = name](const std::string& id) {
      auto it = index.find(id);
      return it != index.end() && stratum[it->second] == name;
    };
    bool has_mass = false;
    for (std::size_t i = 0; i < dist.doc_ids.size() && !has_mass; ++i)
      has_mass = keep(dist.doc_ids[i]) && dist.probabilities[static_cast<Eigen::Index>(i)] > 0.0;
    if (!has_mass)
      throw PhaseError("curriculum", "stage " + stage.stage_id + ": mixture target '" + name +
                                         "' has no eligible documents");
    names.push_back(name);
    target_tokens.push_back(frac * static_cast<double>(budget));
    samplers.emplace_back(dist.restricted(keep), clusters);
  }

  std::vector<std::vector<std::uint32_t>> tokens(eligible.size());
  parallel_for(eligible.size(), workers, [&](std::size_t i) { tokens[i] = tokenizer.encode(eligible[i].doc.text); });

  fs::create_directories(out_dir);
  ShardManifest manifest;
  manifest.stage_id = stage.stage_id;
  manifest.seed = seed;
  manifest.budget = budget;
  manifest.eligible_documents = eligible.size();

  Rng rng(seed);
  std::vector<std::uint64_t> emitted(names.size(), 0);
  std::string buffer;
  ShardInfo current;
  auto flush = [&] {
    if (current.documents == 0) return;
    current.file = shard_name(stage.stage_id, manifest.shards.size());
    current.checksum = hash128(buffer).hex();
    write_file(out_dir / current.file, buffer);
    manifest.shards.push_back(current);
    buffer.clear();
    current = ShardInfo{};
  };

  while (manifest.total_tokens < budget) {
    std::size_t pick = 0;
    for (std::size_t s = 1; s < names.size(); ++s)
      if (static_cast<double>(emitted[s]) / target_tokens[s] < static_cast<double>(emitted[pick]) / target_tokens[pick])
        pick = s;
    const std::string id = samplers[pick].next(rng);
    const auto& toks = tokens[index.at(id)];

    buffer += "{\"doc_id\":\"";
    buffer += id;
    buffer += "\",\"token_ids\":[";
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (t) buffer.push_back(',');
      append_number(buffer, toks[t]);
    }
    buffer += "]}\n";

    emitted[pick] += toks.size();
    current.tokens += toks.size();
    ++current.documents;
    manifest.total_tokens += toks.size();
    manifest.max_doc_tokens = std::max<std::uint64_t>(manifest.max_doc_tokens, toks.size());
    if (current.tokens >= options.shard_tokens) flush();
  }
  flush();

  for (std::size_t s = 0; s < names.size(); ++s) manifest.stratum_tokens[names[s]] = emitted[s];
  write_file(out_dir / "manifest.json", manifest_to_json(manifest));
  return manifest;
}

std::string manifest_to_json(const ShardManifest& m) {
  ordered_json j;
  j["stage_id"] = m.stage_id;
  j["seed"] = m.seed;
  j["budget"] = m.budget;
  j["total_tokens"] = m.total_tokens;
  j["max_doc_tokens"] = m.max_doc_tokens;
  j["eligible_documents"] = m.eligible_documents;
  j["stratum_tokens"] = m.stratum_tokens;
  ordered_json shards = ordered_json::array();
  for (const auto& s : m.shards) {
    ordered_json e;
    e["file"] = s.file;
    e["tokens"] = s.tokens;
    e["documents"] = s.documents;
    e["checksum"] = s.checksum;
    shards.push_back(std::move(e));
  }
  j["shards"] = std::move(shards);
  return j.dump(2) + "\n";
}

ShardManifest manifest_from_json(std::string_view text) {
  json j = json::parse(text);
  ShardManifest m;
  m.stage_id = j.at("stage_id").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.budget = j.at("budget").get<std::uint64_t>();
  m.total_tokens = j.at("total_tokens").get<std::uint64_t>();
  m.max_doc_tokens = j.at("max_doc_tokens").get<std::uint64_t>();
  m.eligible_documents = j.at("eligible_documents").get<std::uint64_t>();
  m.stratum_tokens = j.at("stratum_tokens").get<std::map<std::string, std::uint64_t>>();
  for (const auto& e : j.at("shards"))
    m.shards.push_back({e.at("file").get<std::string>(), e.at("tokens").get<std::uint64_t>(),
                        e.at("documents").get<std::uint64_t>(), e.at("checksum").get<std::string>()});
  return m;
}

std::vector<ShardRecord> read_shard(const fs::path& path) {
  std::vector<ShardRecord> out;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    out.push_back({j.at("doc_id").get<std::string>(), j.at("token_ids").get<std::vector<std::uint32_t>>()});
  }
  return out;
}

ShardManifest verify_manifest(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IntegrityError("missing manifest: " + manifest_path.string());
  ShardManifest m;
  try {
    m = manifest_from_json(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw IntegrityError("unreadable manifest " + manifest_path.string() + ": " + e.what());
  }
  std::uint64_t total = 0;
  for (const auto& s : m.shards) {
    const auto path = dir / s.file;
    if (!fs::exists(path)) throw IntegrityError("missing shard " + s.file);
    if (hash128(read_file(path)).hex() != s.checksum) throw IntegrityError("checksum mismatch in shard " + s.file);
    total += s.tokens;
  }
  if (total != m.total_tokens) throw IntegrityError("manifest token total disagrees with shards in " + dir.string());
  return m;
}

}  // namespace curate
