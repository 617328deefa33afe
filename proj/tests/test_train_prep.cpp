#include <cmath>
#include <filesystem>

#include "curate/corpus.hpp"
#include "curate/error.hpp"
#include "curate/rng.hpp"
#include "curate/train_prep.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace curate;
namespace fs = std::filesystem;

namespace {

const LrScheduleSpec kSpec{1e-3, 100, 200, 300, 5e-4, 350, 0.0};

std::vector<std::pair<std::uint32_t, std::uint32_t>> bounds(const PackedSequence& s) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& sp : s.spans) out.emplace_back(sp.begin, sp.end);
  return out;
}

std::vector<TokenDocument> workload(Rng& rng, std::uint32_t L, std::size_t docs) {
  std::vector<TokenDocument> out;
  for (std::size_t d = 0; d < docs; ++d) {
    const std::size_t len = 1 + rng.below(rng.below(5) == 0 ? 3 * L : L);
    TokenDocument t{"d" + std::to_string(d), {}};
    for (std::size_t i = 0; i < len; ++i) t.tokens.push_back(1 + static_cast<std::uint32_t>(rng.below(1000)));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

TEST_SUITE("train_prep") {
  TEST_CASE("lr schedule endpoints and midpoint") {
    CHECK(lr_at(0, kSpec) == 0.0);
    CHECK(lr_at(100, kSpec) == 1e-3);
    CHECK(lr_at(150, kSpec) == 1e-3);
    CHECK(lr_at(250, kSpec) == doctest::Approx(7.5e-4).epsilon(1e-15));
    CHECK(lr_at(350, kSpec) == 0.0);
    CHECK_THROWS_AS(lr_at(351, kSpec), ValidationError);
    CHECK(lr_phase(50, kSpec) == LrPhase::warmup);
    CHECK(lr_phase(150, kSpec) == LrPhase::constant);
    CHECK(lr_phase(250, kSpec) == LrPhase::slow_decay);
    CHECK(lr_phase(320, kSpec) == LrPhase::fast_decay);
  }

  TEST_CASE("lr schedule validation") {
    auto bad = kSpec;
    bad.warmup_end = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = kSpec;
    bad.slow_decay_lr = 2e-3;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = kSpec;
    bad.end = 10000;  // fast phase shallower than slow phase
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    CHECK_NOTHROW(kSpec.validate());
  }

  TEST_CASE("lr schedule matches closed form, is continuous and non-increasing after warmup") {
    const LrScheduleSpec s{3e-4, 2000, 50000, 80000, 1e-4, 90000, 1e-5};
    Rng rng(1);
    for (int k = 0; k < 10000; ++k) {
      const auto t = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(s.end) + 1));
      const double want = oracle::lr(static_cast<double>(t), s.peak_lr, 2000, 50000, 80000, 1e-4, 90000, 1e-5);
      const double got = lr_at(t, s);
      REQUIRE(std::abs(got - want) <= 1e-12 * std::max(std::abs(want), 1e-300));
    }
    const double bound = s.peak_lr * 2 / 2000.0;
    for (std::int64_t t = 0; t < s.end; ++t) {
      REQUIRE(std::abs(lr_at(t + 1, s) - lr_at(t, s)) <= bound);
      if (t >= s.warmup_end) REQUIRE(lr_at(t + 1, s) <= lr_at(t, s));
    }
  }

  TEST_CASE("schedule csv") {
    const auto csv = schedule_csv(kSpec, 100);
    CHECK(csv.rfind("step,lr,phase\n", 0) == 0);
    CHECK(csv.find("\n350,") != std::string::npos);
  }

  TEST_CASE("packing examples") {
    PackingPolicy p{8, 0};
    std::vector<TokenDocument> a{{"x", std::vector<std::uint32_t>(3, 1)}, {"y", std::vector<std::uint32_t>(5, 2)}};
    auto s = pack_documents(a, p);
    REQUIRE(s.size() == 1);
    CHECK(bounds(s[0]) == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 3}, {3, 8}});
    CHECK(s[0].pad_from == 8);

    std::vector<TokenDocument> b{{"long", std::vector<std::uint32_t>(10, 7)}};
    s = pack_documents(b, PackingPolicy{4, 0});
    REQUIRE(s.size() == 3);
    CHECK(bounds(s[0]) == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 4}});
    CHECK(bounds(s[1]) == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 4}});
    CHECK(bounds(s[2]) == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 2}});
    CHECK(s[2].pad_from == 2);
    CHECK(s[2].token_ids[3] == 0);

    std::vector<TokenDocument> c{{"a", std::vector<std::uint32_t>(4, 1)},
                                 {"b", std::vector<std::uint32_t>(4, 2)},
                                 {"c", std::vector<std::uint32_t>(4, 3)}};
    s = pack_documents(c, p);
    REQUIRE(s.size() == 2);
    CHECK(bounds(s[0]) == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 4}, {4, 8}});
    CHECK(bounds(s[1]) == std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 4}});
    CHECK(s[1].pad_from == 4);
  }

  TEST_CASE("packing conserves every token in order") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      const auto L = static_cast<std::uint32_t>(1 + rng.below(300));
      const auto docs = workload(rng, L, 1 + rng.below(30));
      const auto seqs = pack_documents(docs, PackingPolicy{L, 0});
      std::map<std::string, std::vector<std::uint32_t>> rebuilt;
      std::size_t non_pad = 0;
      for (const auto& s : seqs) {
        REQUIRE(s.length() == L);
        for (const auto& sp : s.spans)
          for (auto i = sp.begin; i < sp.end; ++i) rebuilt[sp.doc_id].push_back(s.token_ids[i]);
        non_pad += s.pad_from;
        for (auto i = s.pad_from; i < L; ++i) REQUIRE(s.token_ids[i] == 0);
      }
      std::size_t total = 0;
      for (const auto& d : docs) {
        total += d.tokens.size();
        REQUIRE(rebuilt[d.doc_id] == d.tokens);
      }
      REQUIRE(non_pad == total);
    }
  }

  TEST_CASE("mask examples") {
    PackedSequence s;
    s.token_ids.assign(10, 1);
    s.spans = {{0, 3, "a"}, {3, 8, "b"}};
    s.pad_from = 8;
    const CrossDocMask m(s);
    CHECK_FALSE(m(4, 2));
    CHECK(m(4, 3));
    CHECK_FALSE(m(2, 3));
    for (std::size_t j = 0; j < 10; ++j) {
      CHECK_FALSE(m(9, j));
      CHECK_FALSE(m(j, 8));
    }
    PackedSequence one;
    one.token_ids.assign(16, 1);
    one.spans = {{0, 16, "x"}};
    one.pad_from = 16;
    const CrossDocMask c(one);
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = 0; j < 16; ++j) CHECK(c(i, j) == (j <= i));
  }

  TEST_CASE("mask equals the brute-force rule and its dense form") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      const auto L = static_cast<std::uint32_t>(1 + rng.below(512));
      const auto seqs = pack_documents(workload(rng, L, 1 + rng.below(12)), PackingPolicy{L, 0});
      for (const auto& s : seqs) {
        const CrossDocMask m(s);
        const auto dense = m.materialize();
        const auto b = bounds(s);
        for (std::size_t i = 0; i < L; ++i)
          for (std::size_t j = 0; j < L; ++j) {
            const bool want = oracle::mask(b, s.pad_from, i, j);
            REQUIRE(m(i, j) == want);
            REQUIRE(dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == want);
          }
      }
    }
  }

  TEST_CASE("long sequences use span metadata only") {
    PackedSequence s;
    s.token_ids.assign(kMaxSequenceLength, 1);
    s.spans = {{0, 100000, "a"}, {100000, 262144, "b"}};
    s.pad_from = kMaxSequenceLength;
    const CrossDocMask m(s);
    CHECK(m(262143, 100000));
    CHECK_FALSE(m(262143, 99999));
    CHECK_THROWS_AS(m.materialize(), ValidationError);
  }

  TEST_CASE("pack file round trip") {
    Rng rng(4);
    const PackingPolicy p{64, 0};
    const auto seqs = pack_documents(workload(rng, 64, 20), p);
    const auto path = fs::temp_directory_path() / "curate_pack_test.pack";
    write_packed(path, seqs, p);
    PackingPolicy back_policy;
    const auto back = read_packed(path, &back_policy);
    CHECK(back == seqs);
    CHECK(back_policy.sequence_length == 64);
    write_file(path, read_file(path).substr(0, 40));
    CHECK_THROWS_AS(read_packed(path), IntegrityError);
    fs::remove(path);
  }

  TEST_CASE("rope configs are exact") {
    CHECK(rope_config(RopeStage::pretrain) == RopeConfig{RopeStage::pretrain, 4096, 1.0e4, 128});
    CHECK(rope_config(RopeStage::ext1) == RopeConfig{RopeStage::ext1, 32768, 8.0e6, 128});
    CHECK(rope_config(RopeStage::ext2) == RopeConfig{RopeStage::ext2, 131072, 1.28e8, 128});
    CHECK(rope_stage_from_string("ext2") == RopeStage::ext2);
    CHECK_THROWS_AS(rope_stage_from_string("ext3"), ValidationError);
  }

  TEST_CASE("rope rotation") {
    const auto cfg = rope_config(RopeStage::pretrain, 64);
    Rng rng(5);
    Eigen::VectorXd v(64);
    for (auto& x : v) x = rng.uniform() * 2 - 1;
    CHECK((rope_rotate(v, 0, cfg) - v).norm() == 0.0);
    for (std::int64_t m : {1, 17, 4095, 131071}) {
      const auto r = rope_rotate(v, m, cfg);
      CHECK(std::abs(r.norm() - v.norm()) <= 1e-9 * v.norm());
    }
    // pair 0 rotates by exactly m radians
    Eigen::VectorXd e = Eigen::VectorXd::Zero(64);
    e[0] = 1;
    const auto r = rope_rotate(e, 3, cfg);
    CHECK(r[0] == doctest::Approx(std::cos(3.0)));
    CHECK(r[1] == doctest::Approx(std::sin(3.0)));

    Eigen::VectorXd odd(63);
    odd.setOnes();
    auto odd_cfg = cfg;
    odd_cfg.head_dim = 63;
    CHECK_THROWS_AS(rope_rotate(odd, 1, odd_cfg), ValidationError);
    CHECK_THROWS_AS(rope_rotate(v, 1, rope_config(RopeStage::pretrain, 128)), ValidationError);

    Eigen::VectorXf vf = v.cast<float>();
    CHECK(rope_rotate(vf, 5, cfg).size() == 64);
  }

  TEST_CASE("rope angles shrink as theta grows") {
    const auto a = rope_frequencies(rope_config(RopeStage::pretrain));
    const auto b = rope_frequencies(rope_config(RopeStage::ext1));
    const auto c = rope_frequencies(rope_config(RopeStage::ext2));
    CHECK(a[0] == 1.0);
    CHECK(c[0] == 1.0);
    for (Eigen::Index i = 1; i < a.size(); ++i) {
      CHECK(b[i] < a[i]);
      CHECK(c[i] < b[i]);
    }
  }

  TEST_CASE("rope relative-position identity") {
    const auto cfg = rope_config(RopeStage::ext1, 64);
    Rng rng(6);
    for (int k = 0; k < 1000; ++k) {
      Eigen::VectorXd q(64), kv(64);
      for (auto& x : q) x = rng.uniform() * 2 - 1;
      for (auto& x : kv) x = rng.uniform() * 2 - 1;
      const auto m = static_cast<std::int64_t>(rng.below(32768));
      const auto n = static_cast<std::int64_t>(rng.below(32768));
      const auto d = static_cast<std::int64_t>(rng.below(32768));
      const double lhs = rope_rotate(q, m, cfg).dot(rope_rotate(kv, n, cfg));
      const double rhs = rope_rotate(q, m + d, cfg).dot(rope_rotate(kv, n + d, cfg));
      REQUIRE(std::abs(lhs - rhs) <= 1e-6);
    }
  }
}
