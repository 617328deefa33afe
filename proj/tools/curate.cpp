// Command-line front end. Exit codes: 0 ok, 1 validation, 2 runtime, 3 integrity.

#include <iostream>

#include "CLI11.hpp"
#include "curate/config.hpp"
#include "curate/curriculum.hpp"
#include "curate/dedup.hpp"
#include "curate/error.hpp"
#include "curate/pipeline.hpp"
#include "curate/quality.hpp"
#include "curate/sampling.hpp"
#include "curate/synthetic.hpp"
#include "curate/train_prep.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace curate;

namespace {

// Training inputs are JSONL with at least a "text" field.
std::vector<Document> text_documents(const fs::path& path) {
  std::vector<Document> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
    Document d;
    d.doc_id = j.value("doc_id", path.filename().string() + ":" + std::to_string(n));
    d.text = j.at("text").get<std::string>();
    out.push_back(std::move(d));
  }
  return out;
}

void write_training_docs(const fs::path& path, const std::vector<Document>& docs) {
  std::vector<std::string> lines;
  for (const auto& d : docs) lines.push_back(nlohmann::json{{"doc_id", d.doc_id}, {"text", d.text}}.dump());
  write_lines(path, lines);
}

StagePlan load_plan(const fs::path& path) { return plan_from_json(read_file(path)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus curation and pre-training preparation"};
  app.require_subcommand(1);
  unsigned workers = 1;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse JSONL dumps into sorted corpus shards");
  std::vector<std::string> ingest_in;
  std::string ingest_out;
  std::size_t docs_per_shard = 100000;
  ingest->add_option("--in", ingest_in, "Input JSONL files")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", ingest_out, "Output directory")->required();
  ingest->add_option("--docs-per-shard", docs_per_shard);
  ingest->add_option("--workers", workers);

  // dedup
  auto* dedup = app.add_subcommand("dedup", "Cluster exact and near duplicates, retain top-k variants");
  std::string dedup_in, dedup_out, dedup_cfg;
  dedup->add_option("--in", dedup_in, "Corpus shard directory")->required()->check(CLI::ExistingDirectory);
  dedup->add_option("--out", dedup_out, "Output directory")->required();
  dedup->add_option("--config", dedup_cfg, "JSON with dedup parameters")->check(CLI::ExistingFile);
  dedup->add_option("--workers", workers);

  // quality
  auto* quality = app.add_subcommand("quality", "Classifiers and annotation");
  quality->require_subcommand(1);
  auto* q_train = quality->add_subcommand("train", "Train a linear n-gram classifier");
  std::string pos_path, neg_path, model_out, model_id;
  ClassifierHyper hyper;
  q_train->add_option("--pos", pos_path, "Positive JSONL (text field)")->required()->check(CLI::ExistingFile);
  q_train->add_option("--neg", neg_path, "Negative JSONL (text field)")->required()->check(CLI::ExistingFile);
  q_train->add_option("--id", model_id, "Model id")->required();
  q_train->add_option("--out", model_out, "Model file")->required();
  q_train->add_option("--epochs", hyper.epochs);
  q_train->add_option("--lr", hyper.learning_rate);
  q_train->add_option("--max-order", hyper.max_order);
  q_train->add_option("--max-vocab", hyper.max_vocab);
  q_train->add_option("--seed", hyper.seed);

  auto* q_score = quality->add_subcommand("score", "Score JSONL texts with a model");
  std::string score_model, score_in;
  q_score->add_option("--model", score_model)->required()->check(CLI::ExistingFile);
  q_score->add_option("--in", score_in)->required()->check(CLI::ExistingFile);

  auto* q_annotate = quality->add_subcommand("annotate", "Heuristics plus classifier signals on retained variants");
  std::string ann_dedup, ann_out;
  std::vector<std::string> ann_clf, ann_domain;
  AnnotationConfig ann_cfg;
  q_annotate->add_option("--dedup", ann_dedup, "Output directory of the dedup command")
      ->required()
      ->check(CLI::ExistingDirectory);
  q_annotate->add_option("--classifier", ann_clf, "Quality model files")->check(CLI::ExistingFile);
  q_annotate->add_option("--domain", ann_domain, "tag=model pairs; code and math required")->required();
  q_annotate->add_option("--tag-threshold", ann_cfg.tag_threshold);
  q_annotate->add_option("--out", ann_out)->required();
  q_annotate->add_option("--workers", workers);

  // sample
  auto* sample = app.add_subcommand("sample", "Per-signal weight maps and the merged distribution");
  std::string sample_in, sample_out, sample_policies, sample_clusters;
  std::size_t sample_draws = 0;
  std::uint64_t sample_seed = 0;
  sample->add_option("--annotated", sample_in)->required()->check(CLI::ExistingFile);
  sample->add_option("--policies", sample_policies, "JSON policy list; default derived from signals")
      ->check(CLI::ExistingFile);
  sample->add_option("--out", sample_out, "Weights JSONL")->required();
  sample->add_option("--draws", sample_draws, "Also print this many draws (needs --clusters)");
  sample->add_option("--clusters", sample_clusters)->check(CLI::ExistingFile);
  sample->add_option("--seed", sample_seed);

  // curriculum
  auto* curriculum = app.add_subcommand("curriculum", "Stage planning and emission");
  curriculum->require_subcommand(1);
  auto* c_validate = curriculum->add_subcommand("validate", "Check a stage plan and print budgets");
  std::string plan_path;
  c_validate->add_option("--plan", plan_path)->required()->check(CLI::ExistingFile);
  auto* c_emit = curriculum->add_subcommand("emit", "Emit token shards for one stage");
  std::string emit_stage_id, emit_annotated, emit_weights, emit_clusters, emit_out;
  std::uint64_t emit_seed = 0, shard_tokens = 1 << 20;
  std::uint32_t vocab_size = 102400;
  c_emit->add_option("--plan", plan_path)->required()->check(CLI::ExistingFile);
  c_emit->add_option("--stage", emit_stage_id)->required();
  c_emit->add_option("--annotated", emit_annotated)->required()->check(CLI::ExistingFile);
  c_emit->add_option("--weights", emit_weights)->required()->check(CLI::ExistingFile);
  c_emit->add_option("--clusters", emit_clusters)->required()->check(CLI::ExistingFile);
  c_emit->add_option("--out", emit_out)->required();
  c_emit->add_option("--seed", emit_seed, "Master seed");
  c_emit->add_option("--shard-tokens", shard_tokens);
  c_emit->add_option("--vocab-size", vocab_size);

  // prep
  auto* prep = app.add_subcommand("prep", "Training-prep artifacts");
  prep->require_subcommand(1);
  auto* p_pack = prep->add_subcommand("pack", "Pack a stage's shards into fixed-length sequences");
  std::string pack_in, pack_out;
  PackingPolicy packing;
  p_pack->add_option("--in", pack_in, "Stage directory with manifest.json")->required()->check(CLI::ExistingDirectory);
  p_pack->add_option("--length", packing.sequence_length)->required()->check(CLI::Range(1u, kMaxSequenceLength));
  p_pack->add_option("--pad-id", packing.pad_id);
  p_pack->add_option("--out", pack_out, "Pack file")->required();
  auto* p_sched = prep->add_subcommand("schedule", "Learning-rate schedule");
  std::string sched_spec;
  bool dump_csv = false;
  std::int64_t stride = 1;
  std::optional<std::int64_t> at_step;
  p_sched->add_option("--spec", sched_spec)->required()->check(CLI::ExistingFile);
  p_sched->add_flag("--dump-csv", dump_csv);
  p_sched->add_option("--stride", stride)->check(CLI::PositiveNumber);
  p_sched->add_option("--step", at_step);
  auto* p_rope = prep->add_subcommand("rope", "Print the RoPE configuration of a stage");
  std::string rope_stage_name;
  std::uint32_t head_dim = 128;
  p_rope->add_option("--stage", rope_stage_name, "pretrain, ext1 or ext2")->required();
  p_rope->add_option("--head-dim", head_dim);

  // run / report
  auto* run_cmd = app.add_subcommand("run", "Run every phase under a work directory");
  std::string config_path, work_dir_override, until;
  std::optional<std::uint64_t> seed_override;
  std::optional<unsigned> workers_override;
  run_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed_override);
  run_cmd->add_option("--workers", workers_override);
  run_cmd->add_option("--work-dir", work_dir_override);
  run_cmd->add_option("--until", until, "Stop after this phase");
  auto* report_cmd = app.add_subcommand("report", "Rebuild the report from a work directory");
  std::string report_dir;
  report_cmd->add_option("--work-dir", report_dir)->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus or training set");
  SyntheticSpec spec;
  std::string synth_out, synth_task, synth_neg_out;
  std::size_t per_class = 500;
  synth->add_option("--out", synth_out, "Corpus JSONL, or positives with --task")->required();
  synth->add_option("--documents", spec.documents);
  synth->add_option("--near-pairs", spec.near_duplicate_pairs);
  synth->add_option("--exact-triples", spec.exact_triples);
  synth->add_option("--seed", spec.seed);
  synth->add_option("--task", synth_task, "quality, code, math or same");
  synth->add_option("--neg-out", synth_neg_out, "Negatives JSONL for --task");
  synth->add_option("--per-class", per_class);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*ingest) {
      std::vector<fs::path> files(ingest_in.begin(), ingest_in.end());
      auto result = ingest_files(files, workers);
      write_corpus(ingest_out, result.corpus, docs_per_shard);
      write_file(fs::path(ingest_out) / "ingest_report.json",
                 ingest_report_to_json(result.report, result.corpus.provenance));
      std::cout << "accepted " << result.report.accepted << " of " << result.report.lines << " lines\n";
    } else if (*dedup) {
      const DedupConfig cfg = dedup_cfg.empty() ? DedupConfig{} : dedup_config_from_json(read_file(dedup_cfg));
      cfg.validate();
      Corpus corpus = read_corpus(corpus_shards(dedup_in));
      auto result = deduplicate(corpus, cfg, workers);
      annotate_clusters(corpus, result.clusters);
      write_corpus(fs::path(dedup_out) / "corpus", corpus);
      write_clusters(fs::path(dedup_out) / "clusters.jsonl", result.clusters);
      std::cout << result.stats.documents << " documents, " << result.stats.clusters << " clusters, "
                << result.stats.retained << " retained\n";
    } else if (*q_train) {
      const auto pos = text_documents(pos_path);
      const auto neg = text_documents(neg_path);
      auto clf = train_classifier(pos, neg, hyper, model_id, fs::path(pos_path).filename().string());
      save_classifier(fs::path(model_out), clf);
      std::cout << "train accuracy " << clf.meta.train_accuracy << "\n";
    } else if (*q_score) {
      const auto clf = load_classifier(fs::path(score_model));
      for (const auto& d : text_documents(score_in)) std::cout << d.doc_id << "\t" << clf.score(d.text) << "\n";
    } else if (*q_annotate) {
      const Corpus corpus = read_corpus(corpus_shards(fs::path(ann_dedup) / "corpus"));
      const auto clusters = read_clusters(fs::path(ann_dedup) / "clusters.jsonl");
      std::vector<QualityClassifier> ensemble;
      for (const auto& p : ann_clf) ensemble.push_back(load_classifier(fs::path(p)));
      std::map<std::string, QualityClassifier> domain;
      for (const auto& pair : ann_domain) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos) throw ValidationError("--domain expects tag=model, got '" + pair + "'");
        domain.emplace(pair.substr(0, eq), load_classifier(fs::path(pair.substr(eq + 1))));
      }
      auto out = annotate(corpus, clusters, ensemble, domain, ann_cfg, workers);
      write_annotated(fs::path(ann_out) / "annotated.jsonl", out.documents);
      write_drop_report(fs::path(ann_out) / "drops.jsonl", out.dropped);
      std::cout << out.documents.size() << " kept, " << out.dropped.size() << " dropped\n";
    } else if (*sample) {
      const auto docs = read_annotated(sample_in);
      std::vector<UpsamplePolicy> policies;
      if (!sample_policies.empty()) {
        policies = policies_from_json(read_file(sample_policies));
      } else {
        std::vector<std::string> ids;
        if (!docs.empty())
          for (const auto& [name, _] : docs.front().signals.values)
            if (name.starts_with("clf:")) ids.push_back(name.substr(4));
        policies = default_policies(ids);
      }
      std::vector<WeightMap> maps;
      for (const auto& p : policies) maps.push_back(build_weight_map(docs, p));
      const auto dist = merge_distributions(maps, resolve_lambdas(policies));
      write_weights(sample_out, maps, dist);
      if (sample_draws > 0) {
        if (sample_clusters.empty()) throw ValidationError("--draws needs --clusters");
        const auto clusters = read_clusters(sample_clusters);
        for (const auto& id : draw(dist, clusters, sample_seed, sample_draws)) std::cout << id << "\n";
      }
    } else if (*c_validate) {
      const auto plan = load_plan(plan_path);
      const auto violations = plan_violations(plan);
      if (!violations.empty()) {
        for (const auto& v : violations) std::cerr << v.name << ": " << v.message << "\n";
        return 1;
      }
      const auto budgets = stage_budgets(plan);
      for (std::size_t i = 0; i < plan.stages.size(); ++i)
        std::cout << plan.stages[i].stage_id << "\t" << budgets[i] << "\t" << plan.stages[i].quality_threshold << "\n";
    } else if (*c_emit) {
      const auto plan = validate_plan(load_plan(plan_path));
      const auto it = std::find_if(plan.stages.begin(), plan.stages.end(),
                                   [&](const auto& s) { return s.stage_id == emit_stage_id; });
      if (it == plan.stages.end()) throw ValidationError("no stage '" + emit_stage_id + "' in plan");
      const auto budget = stage_budgets(plan)[static_cast<std::size_t>(it - plan.stages.begin())];
      const auto docs = read_annotated(emit_annotated);
      std::vector<AnnotatedDocument> eligible;
      for (auto i : stage_eligible(docs, *it)) eligible.push_back(docs[i]);
      EmitOptions opts;
      opts.shard_tokens = shard_tokens;
      const auto m = emit_stage(*it, budget, eligible, read_weights(emit_weights), read_clusters(emit_clusters),
                                WhitespaceTokenizer(vocab_size), stage_seed(emit_seed, it->stage_id), emit_out, opts);
      std::cout << "stage " << m.stage_id << ": " << m.total_tokens << " tokens in " << m.shards.size()
                << " shards (budget " << m.budget << ")\n";
    } else if (*p_pack) {
      const auto manifest = verify_manifest(pack_in);
      std::vector<TokenDocument> docs;
      for (const auto& s : manifest.shards)
        for (auto& r : read_shard(fs::path(pack_in) / s.file)) docs.push_back({std::move(r.doc_id), std::move(r.token_ids)});
      const auto seqs = pack_documents(docs, packing);
      write_packed(pack_out, seqs, packing);
      std::cout << seqs.size() << " sequences of length " << packing.sequence_length << "\n";
    } else if (*p_sched) {
      const auto s = schedule_from_json(read_file(sched_spec));
      s.validate();
      if (at_step) std::cout << lr_at(*at_step, s) << "\t" << to_string(lr_phase(*at_step, s)) << "\n";
      if (dump_csv) std::cout << schedule_csv(s, stride);
      if (!at_step && !dump_csv) std::cout << "schedule valid, " << s.end << " steps\n";
    } else if (*p_rope) {
      const auto cfg = rope_config(rope_stage_from_string(rope_stage_name), head_dim);
      nlohmann::ordered_json j;
      j["stage"] = to_string(cfg.stage);
      j["sequence_length"] = cfg.sequence_length;
      j["theta"] = cfg.theta;
      j["head_dim"] = cfg.head_dim;
      std::cout << j.dump(2) << "\n";
    } else if (*run_cmd) {
      auto cfg = load_pipeline_config(config_path);
      if (seed_override) cfg.master_seed = *seed_override;
      if (workers_override) cfg.workers = *workers_override;
      if (!work_dir_override.empty()) cfg.work_dir = work_dir_override;
      cfg.stop_after = until;
      const auto rep = run(cfg);
      std::cout << rep.to_json(true);
      if (!rep.reconciliation_failures().empty()) return 2;
    } else if (*report_cmd) {
      std::cout << report(report_dir).to_json(false);
    } else if (*synth) {
      if (!synth_task.empty()) {
        if (synth_neg_out.empty()) throw ValidationError("--task needs --neg-out");
        const auto set = synthetic_training_set(synth_task, per_class, spec.seed);
        write_training_docs(synth_out, set.positives);
        write_training_docs(synth_neg_out, set.negatives);
      } else {
        write_lines(synth_out, make_synthetic_corpus(spec).lines);
      }
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return 3;
  } catch (const PhaseError& e) {
    std::cerr << "phase error in " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
