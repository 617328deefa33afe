#include "curate/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "curate/error.hpp"
#include "json.hpp"

namespace curate {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kPhaseRecord = "phase.json";

struct PhaseRecord {
  std::string phase;
  std::string key;
  std::string upstream_key;
  std::string config_hash;
  std::map<std::string, std::string> outputs;  // relative path -> hash128 hex
};

std::map<std::string, std::string> checksum_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == kPhaseRecord) continue;
    out[rel] = hash128(read_file(entry.path())).hex();
  }
  return out;
}

void write_record(const fs::path& dir, const PhaseRecord& r) {
  ordered_json j;
  j["phase"] = r.phase;
  j["key"] = r.key;
  j["upstream_key"] = r.upstream_key;
  j["config_hash"] = r.config_hash;
  j["outputs"] = r.outputs;
  write_file(dir / kPhaseRecord, j.dump(2) + "\n");
}

std::optional<PhaseRecord> read_record(const fs::path& dir) {
  const auto path = dir / kPhaseRecord;
  if (!fs::exists(path)) return std::nullopt;
  try {
    json j = json::parse(read_file(path));
    PhaseRecord r;
    r.phase = j.at("phase").get<std::string>();
    r.key = j.at("key").get<std::string>();
    r.upstream_key = j.at("upstream_key").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw IntegrityError("unreadable phase record " + path.string() + ": " + e.what());
  }
}

/// Throws IntegrityError naming the first missing or altered output.
void verify_outputs(const fs::path& dir, const PhaseRecord& r) {
  for (const auto& [rel, sum] : r.outputs) {
    const auto path = dir / rel;
    if (!fs::exists(path)) throw IntegrityError("missing artifact " + (fs::path(r.phase) / rel).generic_string());
    if (hash128(read_file(path)).hex() != sum)
      throw IntegrityError("checksum mismatch in " + (fs::path(r.phase) / rel).generic_string());
  }
}

bool outputs_intact(const fs::path& dir, const PhaseRecord& r) {
  try {
    verify_outputs(dir, r);
    return true;
  } catch (const IntegrityError&) {
    return false;
  }
}

std::string file_digest(const fs::path& p) { return hash128(read_file(p)).hex(); }

// ---------------------------------------------------------------------------
// Phase bodies. Each reads upstream artifacts from work_dir and writes into out.

void phase_ingest(const PipelineConfig& cfg, const fs::path&, const fs::path& out, const std::string& config_hash) {
  auto result = ingest_files(cfg.inputs, cfg.workers);
  result.corpus.provenance["config_hash"] = config_hash;
  write_corpus(out / "corpus", result.corpus, cfg.docs_per_shard);
  write_file(out / "ingest_report.json", ingest_report_to_json(result.report, result.corpus.provenance));
}

void phase_dedup(const PipelineConfig& cfg, const fs::path& work, const fs::path& out, const std::string&) {
  Corpus corpus = read_corpus(corpus_shards(work / "ingest" / "corpus"));
  auto result = deduplicate(corpus, cfg.dedup, cfg.workers);
  annotate_clusters(corpus, result.clusters);
  write_corpus(out / "corpus", corpus, cfg.docs_per_shard);
  write_clusters(out / "clusters.jsonl", result.clusters);
  ordered_json stats;
  stats["documents"] = result.stats.documents;
  stats["candidate_pairs"] = result.stats.candidate_pairs;
  stats["verified_edges"] = result.stats.verified_edges;
  stats["clusters"] = result.stats.clusters;
  stats["retained"] = result.stats.retained;
  write_file(out / "dedup_stats.json", stats.dump(2) + "\n");
}

void phase_quality(const PipelineConfig& cfg, const fs::path& work, const fs::path& out, const std::string&) {
  const Corpus corpus = read_corpus(corpus_shards(work / "dedup" / "corpus"));
  const auto clusters = read_clusters(work / "dedup" / "clusters.jsonl");
  std::vector<QualityClassifier> ensemble;
  for (const auto& p : cfg.quality.classifiers) ensemble.push_back(load_classifier(p));
  std::map<std::string, QualityClassifier> domain;
  for (const auto& [tag, p] : cfg.quality.domain_classifiers) domain.emplace(tag, load_classifier(p));
  auto annotated = annotate(corpus, clusters, ensemble, domain, cfg.quality.annotation, cfg.workers);
  write_annotated(out / "annotated.jsonl", annotated.documents);
  write_drop_report(out / "drops.jsonl", annotated.dropped);
}

std::vector<UpsamplePolicy> effective_policies(const PipelineConfig& cfg) {
  if (!cfg.sampling.empty()) return cfg.sampling;
  std::vector<std::string> ids;
  for (const auto& p : cfg.quality.classifiers) ids.push_back(load_classifier(p).model_id);
  return default_policies(ids);
}

void phase_sample(const PipelineConfig& cfg, const fs::path& work, const fs::path& out, const std::string&) {
  const auto docs = read_annotated(work / "quality" / "annotated.jsonl");
  if (docs.empty()) throw PhaseError("sample", "no documents survived quality filtering");
  const auto policies = effective_policies(cfg);
  std::vector<WeightMap> maps;
  for (const auto& p : policies) maps.push_back(build_weight_map(docs, p));
  const auto lambdas = resolve_lambdas(policies);
  const auto dist = merge_distributions(maps, lambdas);
  write_weights(out / "weights.jsonl", maps, dist);
}

void phase_curriculum(const PipelineConfig& cfg, const fs::path& work, const fs::path& out, const std::string&) {
  const auto docs = read_annotated(work / "quality" / "annotated.jsonl");
  const auto clusters = read_clusters(work / "dedup" / "clusters.jsonl");
  const auto dist = read_weights(work / "sample" / "weights.jsonl");
  const auto& plan = cfg.curriculum.plan;
  const auto budgets = stage_budgets(plan);
  const WhitespaceTokenizer tokenizer(cfg.curriculum.vocab_size);
  write_file(out / "plan.json", plan_to_json(plan));
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& stage = plan.stages[s];
    std::vector<AnnotatedDocument> eligible;
    for (auto i : stage_eligible(docs, stage)) eligible.push_back(docs[i]);
    if (eligible.empty()) throw PhaseError("curriculum", "stage " + stage.stage_id + " has no eligible documents");
    EmitOptions opts;
    opts.shard_tokens = cfg.curriculum.shard_tokens;
    emit_stage(stage, budgets[s], eligible, dist, clusters, tokenizer, stage_seed(cfg.master_seed, stage.stage_id),
               out / ("stage-" + stage.stage_id), opts, cfg.workers);
  }
}

void phase_prep(const PipelineConfig& cfg, const fs::path& work, const fs::path& out, const std::string&) {
  const auto plan = plan_from_json(read_file(work / "curriculum" / "plan.json"));
  for (const auto& stage : plan.stages) {
    const auto dir = work / "curriculum" / ("stage-" + stage.stage_id);
    const auto manifest = verify_manifest(dir);
    std::vector<TokenDocument> docs;
    for (const auto& shard : manifest.shards)
      for (auto& rec : read_shard(dir / shard.file)) docs.push_back({std::move(rec.doc_id), std::move(rec.token_ids)});
    const auto seqs = pack_documents(docs, cfg.prep.packing);
    const auto pack_path = out / ("stage-" + stage.stage_id + ".pack");
    write_packed(pack_path, seqs, cfg.prep.packing);
    std::uint64_t tokens = 0;
    for (const auto& s : seqs) tokens += s.pad_from;
    ordered_json m;
    m["stage_id"] = stage.stage_id;
    m["sequence_length"] = cfg.prep.packing.sequence_length;
    m["pad_id"] = cfg.prep.packing.pad_id;
    m["sequences"] = seqs.size();
    m["tokens"] = tokens;
    m["pad_tokens"] = seqs.size() * cfg.prep.packing.sequence_length - tokens;
    m["checksum"] = file_digest(pack_path);
    write_file(out / ("stage-" + stage.stage_id + ".pack.json"), m.dump(2) + "\n");
  }
  const auto rope = rope_config(cfg.prep.rope_stage, cfg.prep.head_dim);
  ordered_json r;
  r["stage"] = to_string(rope.stage);
  r["sequence_length"] = rope.sequence_length;
  r["theta"] = rope.theta;
  r["head_dim"] = rope.head_dim;
  write_file(out / "rope.json", r.dump(2) + "\n");
  if (cfg.prep.schedule) write_file(out / "schedule.csv", schedule_csv(*cfg.prep.schedule));
}

using PhaseFn = std::function<void(const PipelineConfig&, const fs::path&, const fs::path&, const std::string&)>;

std::string phase_section(const PipelineConfig& cfg, std::string_view phase) {
  const json cj = json::parse(cfg.canonical_json());
  json section;
  if (phase == "ingest") {
    section["inputs"] = cj["inputs"];
    json digests = json::array();
    for (const auto& p : cfg.inputs) digests.push_back(file_digest(p));
    section["input_digests"] = std::move(digests);
    section["docs_per_shard"] = cj["docs_per_shard"];
  } else if (phase == "dedup") {
    section = cj["dedup"];
  } else if (phase == "quality") {
    section = cj["quality"];
    json digests = json::array();
    for (const auto& p : cfg.quality.classifiers) digests.push_back(file_digest(p));
    for (const auto& [tag, p] : cfg.quality.domain_classifiers) digests.push_back(file_digest(p));
    section["classifier_digests"] = std::move(digests);
  } else if (phase == "sample") {
    section = cj["sampling"];
  } else if (phase == "curriculum") {
    section = cj["curriculum"];
    section["master_seed"] = cj["master_seed"];
  } else {
    section = cj["prep"];
  }
  return section.dump();
}

SignalQuantiles quantiles(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::llround(q * static_cast<double>(v.size() - 1)));
    return v[idx];
  };
  return {at(0.0), at(0.25), at(0.5), at(0.75), at(1.0)};
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> PipelineReport::reconciliation_failures() const {
  std::vector<std::string> out;
  auto has = [&](const char* p) { return present.contains(p) && present.at(p); };
  if (has("ingest") && ingest.in != ingest.out + [&] {
        std::size_t n = 0;
        for (const auto& [_, c] : ingest.rejects) n += c;
        return n;
      }())
    out.emplace_back("ingest: accepted + rejected != input lines");
  if (has("ingest") && has("dedup") && ingest.out != dedup.in) out.emplace_back("ingest.out != dedup.in");
  if (has("dedup") && has("quality") && dedup.out != quality.in) out.emplace_back("dedup.out != quality.in");
  if (has("quality") && has("sample") && quality.out != sample.in) out.emplace_back("quality.out != sample.in");
  if (has("ingest") && has("dedup") && has("quality") && has("sample")) {
    const std::size_t beyond = dedup.in - dedup.out;
    const std::size_t dropped = quality.in - quality.out;
    if (ingest.out - dropped - beyond != sample.in)
      out.emplace_back("ingested - heuristic_dropped - beyond_retained != available_to_sampling");
  }
  if (has("curriculum")) {
    std::uint64_t budgets = 0;
    for (const auto& s : stages) {
      budgets += s.budget;
      if (s.emitted_tokens < s.budget || s.emitted_tokens >= s.budget + std::max<std::uint64_t>(1, s.max_doc_tokens))
        out.push_back("curriculum: stage " + s.stage_id + " emitted tokens outside [budget, budget + max_doc_tokens)");
    }
    if (budgets != total_token_budget) out.emplace_back("curriculum: stage budgets do not sum to the total");
  }
  if (has("curriculum") && has("prep")) {
    for (const auto& p : packs) {
      auto it = std::find_if(stages.begin(), stages.end(), [&](const auto& s) { return s.stage_id == p.stage_id; });
      if (it == stages.end() || it->emitted_tokens != p.tokens)
        out.push_back("prep: packed tokens for stage " + p.stage_id + " differ from emitted tokens");
    }
  }
  return out;
}

std::string PipelineReport::to_json(bool include_run_info) const {
  ordered_json j;
  j["config_hash"] = config_hash;
  auto has = [&](const char* p) { return present.contains(p) && present.at(p); };
  auto absent = [] { return ordered_json{{"status", "absent"}}; };

  if (has("ingest"))
    j["ingest"] = {{"status", "complete"}, {"lines", ingest.in}, {"accepted", ingest.out}, {"rejects", ingest.rejects}};
  else
    j["ingest"] = absent();

  if (has("dedup")) {
    ordered_json hist = ordered_json::object();
    for (const auto& [size, count] : cluster_size_histogram) hist[std::to_string(size)] = count;
    j["dedup"] = {{"status", "complete"},     {"documents", dedup.in},
                  {"clusters", clusters},     {"retained", dedup.out},
                  {"beyond_retained", dedup.in - dedup.out}, {"duplicate_rate", duplicate_rate},
                  {"cluster_size_histogram", hist}};
  } else {
    j["dedup"] = absent();
  }

  if (has("quality")) {
    ordered_json q;
    for (const auto& [name, s] : signal_quantiles)
      q[name] = {{"p0", s.p0}, {"p25", s.p25}, {"p50", s.p50}, {"p75", s.p75}, {"p100", s.p100}};
    j["quality"] = {{"status", "complete"}, {"examined", quality.in}, {"kept", quality.out}, {"dropped", quality.in - quality.out},
                    {"drop_reasons", quality.rejects}, {"signal_quantiles", q}};
  } else {
    j["quality"] = absent();
  }

  if (has("sample"))
    j["sample"] = {{"status", "complete"}, {"documents", sample.in}, {"mixture_weights", mixture_weights}};
  else
    j["sample"] = absent();

  if (has("curriculum")) {
    ordered_json arr = ordered_json::array();
    for (const auto& s : stages)
      arr.push_back({{"stage_id", s.stage_id},
                     {"budget", s.budget},
                     {"emitted_tokens", s.emitted_tokens},
                     {"max_doc_tokens", s.max_doc_tokens},
                     {"eligible_documents", s.eligible_documents},
                     {"stratum_tokens", s.stratum_tokens},
                     {"shard_checksums", s.shard_checksums}});
    j["curriculum"] = {{"status", "complete"}, {"total_token_budget", total_token_budget}, {"stages", arr}};
  } else {
    j["curriculum"] = absent();
  }

  if (has("prep")) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : packs)
      arr.push_back({{"stage_id", p.stage_id},
                     {"sequences", p.sequences},
                     {"tokens", p.tokens},
                     {"pad_tokens", p.pad_tokens},
                     {"checksum", p.checksum}});
    j["prep"] = {{"status", "complete"}, {"sequence_length", sequence_length}, {"packs", arr}};
  } else {
    j["prep"] = absent();
  }

  const auto failures = reconciliation_failures();
  j["reconciliation"] = {{"holds", failures.empty()}, {"failures", failures}};
  if (include_run_info) j["run"] = {{"phase_status", phase_status}, {"timing_seconds", timing_seconds}};
  return j.dump(2) + "\n";
}

PipelineReport report(const fs::path& work_dir) {
  PipelineReport rep;
  std::vector<std::string> missing;
  std::string upstream;
  for (auto phase_sv : kPhases) {
    const std::string phase(phase_sv);
    const auto dir = work_dir / phase;
    auto rec = read_record(dir);
    const bool chained = rec && rec->upstream_key == upstream;
    rep.present[phase] = chained;
    if (!chained) {
      missing.push_back(phase + "/" + kPhaseRecord);
      upstream = "\x01";  // later phases cannot chain onto a missing one
      continue;
    }
    verify_outputs(dir, *rec);
    upstream = rec->key;
    rep.config_hash = rec->config_hash;
  }
  if (std::none_of(rep.present.begin(), rep.present.end(), [](const auto& kv) { return kv.second; })) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw IntegrityError("no completed phases in " + work_dir.string() + "; missing: " + list);
  }

  try {
    if (rep.present["ingest"]) {
      const auto r = ingest_report_from_json(read_file(work_dir / "ingest" / "ingest_report.json"));
      rep.ingest.in = r.lines;
      rep.ingest.out = r.accepted;
      rep.ingest.rejects = r.rejects;
    }
    if (rep.present["dedup"]) {
      const auto clusters = read_clusters(work_dir / "dedup" / "clusters.jsonl");
      rep.clusters = clusters.size();
      for (const auto& c : clusters) {
        rep.dedup.in += c.member_ids.size();
        rep.dedup.out += c.retained_ids.size();
        ++rep.cluster_size_histogram[c.member_ids.size()];
      }
      rep.duplicate_rate =
          rep.dedup.in ? 1.0 - static_cast<double>(rep.clusters) / static_cast<double>(rep.dedup.in) : 0.0;
    }
    if (rep.present["quality"]) {
      const auto docs = read_annotated(work_dir / "quality" / "annotated.jsonl");
      const auto drops = read_drop_report(work_dir / "quality" / "drops.jsonl");
      rep.quality.out = docs.size();
      rep.quality.in = docs.size() + drops.size();
      // rejects counts reasons; a document failing several checks appears under each
      for (const auto& d : drops)
        for (const auto& r : d.reasons) ++rep.quality.rejects[r];
      std::map<std::string, std::vector<double>> values;
      for (const auto& d : docs)
        for (const auto& [name, v] : d.signals.values) values[name].push_back(v);
      for (auto& [name, v] : values) rep.signal_quantiles[name] = quantiles(std::move(v));
    }
    if (rep.present["sample"]) {
      const auto dist = read_weights(work_dir / "sample" / "weights.jsonl");
      rep.sample.in = rep.sample.out = dist.doc_ids.size();
      rep.mixture_weights = dist.mixture_weights;
    }
    if (rep.present["curriculum"]) {
      const auto plan = plan_from_json(read_file(work_dir / "curriculum" / "plan.json"));
      rep.total_token_budget = plan.total_token_budget;
      for (const auto& stage : plan.stages) {
        const auto m = verify_manifest(work_dir / "curriculum" / ("stage-" + stage.stage_id));
        StageTotals t;
        t.stage_id = m.stage_id;
        t.budget = m.budget;
        t.emitted_tokens = m.total_tokens;
        t.max_doc_tokens = m.max_doc_tokens;
        t.eligible_documents = m.eligible_documents;
        t.stratum_tokens = m.stratum_tokens;
        for (const auto& s : m.shards) t.shard_checksums.push_back(s.checksum);
        rep.stages.push_back(std::move(t));
      }
    }
    if (rep.present["prep"]) {
      for (const auto& entry : fs::directory_iterator(work_dir / "prep")) {
        const auto name = entry.path().filename().string();
        if (!name.ends_with(".pack.json")) continue;
        json m = json::parse(read_file(entry.path()));
        rep.sequence_length = m.at("sequence_length").get<std::uint32_t>();
        rep.packs.push_back({m.at("stage_id").get<std::string>(), m.at("sequences").get<std::uint64_t>(),
                             m.at("tokens").get<std::uint64_t>(), m.at("pad_tokens").get<std::uint64_t>(),
                             m.at("checksum").get<std::string>()});
      }
      std::sort(rep.packs.begin(), rep.packs.end(), [](const auto& a, const auto& b) { return a.stage_id < b.stage_id; });
    }
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("malformed artifact: ") + e.what());
  }
  return rep;
}

PipelineReport run(const PipelineConfig& cfg) {
  cfg.validate();
  if (!cfg.stop_after.empty() && std::find(kPhases.begin(), kPhases.end(), cfg.stop_after) == kPhases.end())
    throw ValidationError("unknown phase '" + cfg.stop_after + "'");

  const std::string config_hash = cfg.hash();
  const std::map<std::string_view, PhaseFn> bodies = {
      {"ingest", phase_ingest}, {"dedup", phase_dedup},           {"quality", phase_quality},
      {"sample", phase_sample}, {"curriculum", phase_curriculum}, {"prep", phase_prep}};

  fs::create_directories(cfg.work_dir);
  std::map<std::string, double> timing;
  std::map<std::string, std::string> status;
  std::string upstream;
  bool rerun_downstream = false;
  for (auto phase_sv : kPhases) {
    const std::string phase(phase_sv);
    const auto dir = cfg.work_dir / phase;
    const auto partial = cfg.work_dir / (phase + ".partial");
    const std::string key = hash128(upstream + "\x1e" + phase + "\x1e" + phase_section(cfg, phase)).hex();

    auto rec = read_record(dir);
    if (!rerun_downstream && rec && rec->key == key && rec->upstream_key == upstream && outputs_intact(dir, *rec)) {
      status[phase] = "skipped";
      timing[phase] = 0.0;
    } else {
      rerun_downstream = true;
      fs::remove_all(dir);
      fs::remove_all(partial);
      fs::create_directories(partial);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        bodies.at(phase_sv)(cfg, cfg.work_dir, partial, config_hash);
      } catch (const PhaseError&) {
        throw;
      } catch (const IntegrityError&) {
        throw;
      } catch (const std::exception& e) {
        throw PhaseError(phase, e.what());
      }
      PhaseRecord r{phase, key, upstream, config_hash, checksum_tree(partial)};
      write_record(partial, r);
      fs::rename(partial, dir);
      timing[phase] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      status[phase] = "ran";
    }
    upstream = key;
    if (phase == cfg.stop_after) {
      // Later phases were built from different upstream state.
      if (rerun_downstream)
        for (auto later = std::find(kPhases.begin(), kPhases.end(), phase_sv) + 1; later != kPhases.end(); ++later)
          fs::remove_all(cfg.work_dir / std::string(*later));
      break;
    }
  }

  PipelineReport rep = report(cfg.work_dir);
  rep.timing_seconds = std::move(timing);
  rep.phase_status = std::move(status);
  write_file(cfg.work_dir / "report.json", rep.to_json(true));
  return rep;
}

}  // namespace curate
