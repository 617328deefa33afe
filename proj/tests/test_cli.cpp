#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "curate/corpus.hpp"
#include "doctest.h"
#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

Result sh(const std::string& args, const fs::path& cwd) {
  const auto out = cwd / "stdout.txt";
  const std::string cmd = "cd '" + cwd.string() + "' && '" CURATE_BIN "' " + args + " > '" + out.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, fs::exists(out) ? curate::read_file(out) : ""};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("subcommands and exit codes") {
    curate::SyntheticSpec spec;
    spec.documents = 400;
    spec.near_duplicate_pairs = 10;
    spec.exact_triples = 5;
    const auto s = fixtures::make_desk_setup(fs::temp_directory_path() / "curate_cli_test", spec, 60000);
    const auto& d = s.dir;

    auto r = sh("prep rope --stage ext1", d);
    CHECK(r.code == 0);
    CHECK(r.out.find("32768") != std::string::npos);
    CHECK(r.out.find("8000000") != std::string::npos);
    CHECK(sh("prep rope --stage ext9", d).code == 1);
    CHECK(sh("run --config missing.json", d).code == 1);
    CHECK(sh("frobnicate", d).code == 1);

    curate::write_file(d / "sched.json",
                       R"({"peak_lr":0.001,"warmup_end":100,"constant_end":200,"slow_decay_end":300,)"
                       R"("slow_decay_lr":0.0005,"end":350,"end_lr":0})");
    r = sh("prep schedule --spec sched.json --dump-csv --stride 50", d);
    CHECK(r.code == 0);
    CHECK(r.out.find("step,lr,phase") == 0);
    CHECK(r.out.find("250,0.00075") != std::string::npos);

    curate::write_file(d / "plan.json", fixtures::four_stage_json(8000000).dump());
    r = sh("curriculum validate --plan plan.json", d);
    CHECK(r.code == 0);
    CHECK(r.out.find("iv\t800000") != std::string::npos);
    auto bad = fixtures::four_stage_json(100);
    bad["stages"][0]["token_share"] = 0.5;
    curate::write_file(d / "bad_plan.json", bad.dump());
    r = sh("curriculum validate --plan bad_plan.json", d);
    CHECK(r.code == 1);
    CHECK(r.out.find("shares_not_unit") != std::string::npos);

    // Individual phases chained by hand.
    CHECK(sh("ingest --in corpus.jsonl --out m/ingest", d).code == 0);
    CHECK(sh("dedup --in m/ingest --out m/dedup --workers 2", d).code == 0);
    CHECK(sh("quality annotate --dedup m/dedup --classifier quality.clf --domain code=code.clf --domain math=math.clf "
             "--out m/quality",
             d)
              .code == 0);
    r = sh("sample --annotated m/quality/annotated.jsonl --out m/weights.jsonl --draws 5 --clusters "
           "m/dedup/clusters.jsonl --seed 3",
           d);
    CHECK(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 5);
    curate::write_file(d / "small_plan.json", fixtures::four_stage_json(20000).dump());
    CHECK(sh("curriculum emit --plan small_plan.json --stage ii --annotated m/quality/annotated.jsonl --weights "
             "m/weights.jsonl --clusters m/dedup/clusters.jsonl --out m/stage-ii --seed 1",
             d)
              .code == 0);
    CHECK(sh("prep pack --in m/stage-ii --length 1024 --out m/ii.pack", d).code == 0);
    CHECK(sh("quality score --model quality.clf --in corpus.jsonl", d).code == 0);

    // Whole pipeline, then report and integrity failure.
    r = sh("run --config config.json --workers 2", d);
    CHECK(r.code == 0);
    CHECK(r.out.find("\"holds\": true") != std::string::npos);
    CHECK(sh("report --work-dir work", d).code == 0);
    const auto shard = d / "work" / "ingest" / "ingest_report.json";
    curate::write_file(shard, "{}");
    r = sh("report --work-dir work", d);
    CHECK(r.code == 3);
    CHECK(r.out.find("ingest/ingest_report.json") != std::string::npos);

    auto cfg = nlohmann::json::parse(curate::read_file(s.config_path));
    cfg["curriculum"]["plan"]["stages"][3]["quality_threshold"] = 1.1;
    curate::write_file(d / "failing.json", cfg.dump());
    r = sh("run --config failing.json --work-dir work2", d);
    CHECK(r.code == 2);
    CHECK(r.out.find("curriculum") != std::string::npos);
    fs::remove_all(d);
  }
}
