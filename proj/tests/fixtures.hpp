#pragma once

// Writes a synthetic corpus, three trained classifiers and a pipeline config
// into a directory.

#include <filesystem>
#include <string>

#include "curate/config.hpp"
#include "curate/quality.hpp"
#include "curate/synthetic.hpp"
#include "json.hpp"

namespace fixtures {

struct DeskSetup {
  std::filesystem::path dir;
  std::filesystem::path config_path;
  curate::SyntheticCorpus corpus;
};

inline nlohmann::json four_stage_json(std::uint64_t total) {
  nlohmann::json stages = nlohmann::json::array();
  const char* ids[] = {"i", "ii", "iii", "iv"};
  const double shares[] = {0.15, 0.45, 0.30, 0.10};
  const double thresholds[] = {0.0, 0.0, 0.5, 0.9};
  for (int s = 0; s < 4; ++s)
    stages.push_back({{"stage_id", ids[s]},
                      {"token_share", shares[s]},
                      {"quality_threshold", thresholds[s]},
                      {"mixture", s == 0 ? nlohmann::json{{"code", 0.7}, {"other", 0.3}}
                                         : nlohmann::json{{"code", 0.4}, {"other", 0.6}}}});
  return {{"total_token_budget", total}, {"stages", stages}};
}

inline DeskSetup make_desk_setup(const std::filesystem::path& dir, const curate::SyntheticSpec& spec,
                                 std::uint64_t total_tokens, unsigned workers = 1) {
  namespace fs = std::filesystem;
  fs::remove_all(dir);
  fs::create_directories(dir);
  DeskSetup s{dir, dir / "config.json", curate::make_synthetic_corpus(spec)};
  curate::write_lines(dir / "corpus.jsonl", s.corpus.lines);

  const curate::ClassifierHyper hyper;
  for (const char* task : {"quality", "code", "math"}) {
    const auto set = curate::synthetic_training_set(task, 200, 17);
    const auto clf = curate::train_classifier(set.positives, set.negatives, hyper, task == std::string("quality") ? "q" : task);
    curate::save_classifier(dir / (std::string(task) + ".clf"), clf);
  }

  nlohmann::json cfg = {
      {"inputs", {"corpus.jsonl"}},
      {"work_dir", "work"},
      {"docs_per_shard", 2500},
      {"master_seed", 1234},
      {"workers", workers},
      {"quality",
       {{"classifiers", {"quality.clf"}}, {"domain_classifiers", {{"code", "code.clf"}, {"math", "math.clf"}}}}},
      {"curriculum", {{"plan", four_stage_json(total_tokens)}, {"shard_tokens", 200000}}},
      {"prep",
       {{"sequence_length", 4096},
        {"rope_stage", "pretrain"},
        {"schedule",
         {{"peak_lr", 3e-4},
          {"warmup_end", 100},
          {"constant_end", 600},
          {"slow_decay_end", 900},
          {"slow_decay_lr", 1e-4},
          {"end", 1000},
          {"end_lr", 1e-5}}}}}};
  curate::write_file(s.config_path, cfg.dump(2));
  return s;
}

}  // namespace fixtures
