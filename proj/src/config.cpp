#include "curate/config.hpp"

#include <cmath>

#include "curate/error.hpp"
#include "json.hpp"

namespace curate {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

DedupConfig dedup_from(const json& j) {
  DedupConfig c;
  read_opt(j, "shingle_width", c.shingle_width);
  read_opt(j, "permutations", c.permutations);
  read_opt(j, "bands", c.bands);
  read_opt(j, "rows", c.rows);
  read_opt(j, "jaccard_threshold", c.jaccard_threshold);
  read_opt(j, "top_k", c.top_k);
  read_opt(j, "perm_seed", c.perm_seed);
  return c;
}

ordered_json dedup_to(const DedupConfig& c) {
  ordered_json j;
  j["shingle_width"] = c.shingle_width;
  j["permutations"] = c.permutations;
  j["bands"] = c.bands;
  j["rows"] = c.rows;
  j["jaccard_threshold"] = c.jaccard_threshold;
  j["top_k"] = c.top_k;
  j["perm_seed"] = c.perm_seed;
  return j;
}

StagePlan plan_from(const json& j) {
  StagePlan plan;
  plan.total_token_budget = j.at("total_token_budget").get<std::uint64_t>();
  for (const auto& s : j.at("stages")) {
    StageSpec st;
    st.stage_id = s.at("stage_id").get<std::string>();
    read_opt(s, "description", st.description);
    st.token_share = s.at("token_share").get<double>();
    read_opt(s, "quality_threshold", st.quality_threshold);
    read_opt(s, "gating_signal", st.gating_signal);
    read_opt(s, "mixture", st.mixture);
    plan.stages.push_back(std::move(st));
  }
  return plan;
}

ordered_json plan_to(const StagePlan& plan) {
  ordered_json j;
  j["total_token_budget"] = plan.total_token_budget;
  ordered_json stages = ordered_json::array();
  for (const auto& s : plan.stages) {
    ordered_json e;
    e["stage_id"] = s.stage_id;
    e["description"] = s.description;
    e["token_share"] = s.token_share;
    e["quality_threshold"] = s.quality_threshold;
    e["gating_signal"] = s.gating_signal;
    e["mixture"] = s.mixture;
    stages.push_back(std::move(e));
  }
  j["stages"] = std::move(stages);
  return j;
}

LrScheduleSpec schedule_from(const json& j) {
  LrScheduleSpec s;
  s.peak_lr = j.at("peak_lr").get<double>();
  s.warmup_end = j.at("warmup_end").get<std::int64_t>();
  s.constant_end = j.at("constant_end").get<std::int64_t>();
  s.slow_decay_end = j.at("slow_decay_end").get<std::int64_t>();
  s.slow_decay_lr = j.at("slow_decay_lr").get<double>();
  s.end = j.at("end").get<std::int64_t>();
  s.end_lr = j.at("end_lr").get<double>();
  return s;
}

ordered_json schedule_to(const LrScheduleSpec& s) {
  ordered_json j;
  j["peak_lr"] = s.peak_lr;
  j["warmup_end"] = s.warmup_end;
  j["constant_end"] = s.constant_end;
  j["slow_decay_end"] = s.slow_decay_end;
  j["slow_decay_lr"] = s.slow_decay_lr;
  j["end"] = s.end;
  j["end_lr"] = s.end_lr;
  return j;
}

std::vector<UpsamplePolicy> policies_from(const json& arr) {
  std::vector<UpsamplePolicy> out;
  for (const auto& p : arr) {
    UpsamplePolicy policy;
    policy.signal = p.at("signal").get<std::string>();
    policy.transform.kind = transform_kind_from_string(p.value("transform", std::string("identity")));
    read_opt(p, "threshold", policy.transform.threshold);
    read_opt(p, "boost", policy.transform.boost);
    read_opt(p, "cap", policy.transform.cap);
    if (auto it = p.find("lambda"); it != p.end() && !it->is_null()) policy.lambda = it->get<double>();
    out.push_back(std::move(policy));
  }
  return out;
}

ordered_json policies_to(const std::vector<UpsamplePolicy>& policies) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : policies) {
    ordered_json e;
    e["signal"] = p.signal;
    e["transform"] = to_string(p.transform.kind);
    e["threshold"] = p.transform.threshold;
    e["boost"] = p.transform.boost;
    e["cap"] = p.transform.cap;
    e["lambda"] = p.lambda ? ordered_json(*p.lambda) : ordered_json(nullptr);
    arr.push_back(std::move(e));
  }
  return arr;
}

template <typename Fn>
auto parse_json(std::string_view text, Fn&& fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

}  // namespace

DedupConfig dedup_config_from_json(std::string_view text) {
  return parse_json(text, [](const json& j) { return dedup_from(j); });
}

StagePlan plan_from_json(std::string_view text) {
  return parse_json(text, [](const json& j) { return plan_from(j); });
}

std::string plan_to_json(const StagePlan& plan) { return plan_to(plan).dump(2) + "\n"; }

LrScheduleSpec schedule_from_json(std::string_view text) {
  return parse_json(text, [](const json& j) { return schedule_from(j); });
}

std::vector<UpsamplePolicy> policies_from_json(std::string_view text) {
  return parse_json(text, [](const json& j) { return policies_from(j.is_array() ? j : j.at("policies")); });
}

std::vector<UpsamplePolicy> default_policies(const std::vector<std::string>& classifier_ids) {
  std::vector<UpsamplePolicy> out;
  out.push_back({"freq:occurrence", UpsampleTransform::log2_sublinear(6.0), std::nullopt});
  out.push_back({"tag:code", UpsampleTransform::threshold_boost(1.0, 2.0), std::nullopt});
  out.push_back({"tag:math", UpsampleTransform::threshold_boost(1.0, 2.0), std::nullopt});
  for (const auto& id : classifier_ids) out.push_back({"clf:" + id, UpsampleTransform::identity(), std::nullopt});
  return out;
}

PipelineConfig pipeline_config_from_json(std::string_view text, const fs::path& base_dir) {
  return parse_json(text, [&](const json& j) {
    PipelineConfig c;
    for (const auto& in : j.at("inputs")) c.inputs.push_back(resolve(base_dir, in.get<std::string>()));
    c.work_dir = resolve(base_dir, j.value("work_dir", std::string("work")));
    read_opt(j, "docs_per_shard", c.docs_per_shard);
    read_opt(j, "master_seed", c.master_seed);
    read_opt(j, "workers", c.workers);
    if (auto it = j.find("dedup"); it != j.end()) c.dedup = dedup_from(*it);

    if (auto it = j.find("quality"); it != j.end()) {
      const auto& q = *it;
      if (auto h = q.find("heuristics"); h != q.end()) {
        auto& t = c.quality.annotation.heuristics;
        read_opt(*h, "min_words", t.min_words);
        read_opt(*h, "min_mean_word_length", t.min_mean_word_length);
        read_opt(*h, "max_mean_word_length", t.max_mean_word_length);
        read_opt(*h, "min_alpha_ratio", t.min_alpha_ratio);
        read_opt(*h, "max_line_repeat_ratio", t.max_line_repeat_ratio);
      }
      read_opt(q, "tag_threshold", c.quality.annotation.tag_threshold);
      if (auto cl = q.find("classifiers"); cl != q.end())
        for (const auto& p : *cl) c.quality.classifiers.push_back(resolve(base_dir, p.get<std::string>()));
      if (auto dc = q.find("domain_classifiers"); dc != q.end())
        for (const auto& [tag, p] : dc->items()) c.quality.domain_classifiers[tag] = resolve(base_dir, p.get<std::string>());
    }

    if (auto it = j.find("sampling"); it != j.end())
      c.sampling = policies_from(it->is_array() ? *it : it->at("policies"));

    const auto& cur = j.at("curriculum");
    c.curriculum.plan = plan_from(cur.contains("plan") ? cur.at("plan") : cur);
    read_opt(cur, "shard_tokens", c.curriculum.shard_tokens);
    read_opt(cur, "vocab_size", c.curriculum.vocab_size);

    if (auto it = j.find("prep"); it != j.end()) {
      const auto& p = *it;
      read_opt(p, "sequence_length", c.prep.packing.sequence_length);
      read_opt(p, "pad_id", c.prep.packing.pad_id);
      if (auto rs = p.find("rope_stage"); rs != p.end()) c.prep.rope_stage = rope_stage_from_string(rs->get<std::string>());
      read_opt(p, "head_dim", c.prep.head_dim);
      if (auto s = p.find("schedule"); s != p.end() && !s->is_null()) c.prep.schedule = schedule_from(*s);
    }
    return c;
  });
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
  std::string text = read_file(path);
  return pipeline_config_from_json(text, path.parent_path());
}

void PipelineConfig::validate() const {
  std::vector<std::string> errors;
  auto collect = [&](auto&& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      errors.insert(errors.end(), e.violations().begin(), e.violations().end());
    }
  };
  if (inputs.empty()) errors.emplace_back("inputs: at least one input file required");
  for (const auto& in : inputs)
    if (!fs::exists(in)) errors.push_back("inputs: file not found: " + in.string());
  if (work_dir.empty()) errors.emplace_back("work_dir must be set");
  if (workers < 1) errors.emplace_back("workers must be >= 1");
  if (docs_per_shard < 1) errors.emplace_back("docs_per_shard must be >= 1");
  collect([&] { dedup.validate(); });

  for (const auto& p : quality.classifiers)
    if (!fs::exists(p)) errors.push_back("quality: classifier file not found: " + p.string());
  for (const char* tag : {"code", "math"})
    if (!quality.domain_classifiers.contains(tag))
      errors.push_back(std::string("quality: domain_classifiers must include '") + tag + "'");
  for (const auto& [tag, p] : quality.domain_classifiers)
    if (!fs::exists(p)) errors.push_back("quality: domain classifier file not found: " + p.string());
  if (!(quality.annotation.tag_threshold >= 0.0 && quality.annotation.tag_threshold <= 1.0))
    errors.emplace_back("quality: tag_threshold must be in [0,1]");

  if (!sampling.empty()) {
    for (const auto& p : sampling) {
      if (p.signal.empty()) errors.emplace_back("sampling: policy without signal name");
      if (p.lambda && !(*p.lambda >= 0.0)) errors.push_back("sampling: negative lambda for " + p.signal);
    }
    double total = 0.0;
    for (double l : resolve_lambdas(sampling)) {
      if (l < 0.0) errors.emplace_back("sampling: lambdas exceed 1");
      total += l;
    }
    if (std::abs(total - 1.0) > 1e-9) errors.emplace_back("sampling: lambdas must sum to 1");
  }

  collect([&] { validate_plan(curriculum.plan); });
  if (curriculum.shard_tokens < 1) errors.emplace_back("curriculum: shard_tokens must be >= 1");
  if (curriculum.vocab_size < 2) errors.emplace_back("curriculum: vocab_size must be >= 2");

  if (prep.packing.sequence_length < 1 || prep.packing.sequence_length > kMaxSequenceLength)
    errors.emplace_back("prep: sequence_length out of range");
  if (prep.head_dim == 0 || prep.head_dim % 2 != 0) errors.emplace_back("prep: head_dim must be even");
  if (prep.schedule) collect([&] { prep.schedule->validate(); });

  if (!errors.empty()) throw ValidationError(std::move(errors));
}

std::string PipelineConfig::canonical_json() const {
  ordered_json j;
  ordered_json in = ordered_json::array();
  for (const auto& p : inputs) in.push_back(p.filename().string());
  j["inputs"] = std::move(in);
  j["docs_per_shard"] = docs_per_shard;
  j["master_seed"] = master_seed;
  j["dedup"] = dedup_to(dedup);
  ordered_json q;
  const auto& h = quality.annotation.heuristics;
  q["heuristics"] = {{"min_words", h.min_words},
                     {"min_mean_word_length", h.min_mean_word_length},
                     {"max_mean_word_length", h.max_mean_word_length},
                     {"min_alpha_ratio", h.min_alpha_ratio},
                     {"max_line_repeat_ratio", h.max_line_repeat_ratio}};
  q["tag_threshold"] = quality.annotation.tag_threshold;
  ordered_json cls = ordered_json::array();
  for (const auto& p : quality.classifiers) cls.push_back(p.filename().string());
  q["classifiers"] = std::move(cls);
  ordered_json dom = ordered_json::object();
  for (const auto& [tag, p] : quality.domain_classifiers) dom[tag] = p.filename().string();
  q["domain_classifiers"] = std::move(dom);
  j["quality"] = std::move(q);
  j["sampling"] = policies_to(sampling);
  ordered_json cur;
  cur["plan"] = plan_to(curriculum.plan);
  cur["shard_tokens"] = curriculum.shard_tokens;
  cur["vocab_size"] = curriculum.vocab_size;
  j["curriculum"] = std::move(cur);
  ordered_json prep_j;
  prep_j["sequence_length"] = prep.packing.sequence_length;
  prep_j["pad_id"] = prep.packing.pad_id;
  prep_j["rope_stage"] = to_string(prep.rope_stage);
  prep_j["head_dim"] = prep.head_dim;
  prep_j["schedule"] = prep.schedule ? schedule_to(*prep.schedule) : ordered_json(nullptr);
  j["prep"] = std::move(prep_j);
  return j.dump();
}

std::string PipelineConfig::hash() const { return hash128(canonical_json()).hex(); }

}  // namespace curate
