#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "curate/error.hpp"

namespace curate {

// ---------------------------------------------------------------------------
// Learning-rate schedule: warmup -> constant -> slow decay -> fast decay
// ---------------------------------------------------------------------------

struct LrScheduleSpec {
  double peak_lr = 0.0;
  std::int64_t warmup_end = 0;      // W
  std::int64_t constant_end = 0;    // C
  std::int64_t slow_decay_end = 0;  // S
  double slow_decay_lr = 0.0;       // lr at S
  std::int64_t end = 0;             // E
  double end_lr = 0.0;              // lr at E

  /// 0 < W <= C <= S <= E, rates >= 0 and non-increasing after the peak, and
  /// the fast-decay slope at least as steep as the slow-decay slope.
  void validate() const;
  bool operator==(const LrScheduleSpec&) const = default;
};

enum class LrPhase { warmup, constant, slow_decay, fast_decay };

/// Piecewise linear: [0,W] 0->peak, (W,C] peak, (C,S] peak->lr_s, (S,E] lr_s->lr_e.
double lr_at(std::int64_t step, const LrScheduleSpec& spec);
LrPhase lr_phase(std::int64_t step, const LrScheduleSpec& spec);
std::string to_string(LrPhase phase);

/// "step,lr,phase" rows every `stride` steps, always including E.
std::string schedule_csv(const LrScheduleSpec& spec, std::int64_t stride = 1);

// ---------------------------------------------------------------------------
// Packing and cross-document masks
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kMaxSequenceLength = 262144;
inline constexpr std::uint32_t kMaxMaterializedMask = 8192;

struct DocSpan {
  std::uint32_t begin = 0;  // half-open [begin, end)
  std::uint32_t end = 0;
  std::string doc_id;

  bool operator==(const DocSpan&) const = default;
};

struct PackedSequence {
  std::vector<std::uint32_t> token_ids;  // padded to the sequence length
  std::vector<DocSpan> spans;            // contiguous, covering [0, pad_from)
  std::uint32_t pad_from = 0;

  std::uint32_t length() const { return static_cast<std::uint32_t>(token_ids.size()); }
  bool operator==(const PackedSequence&) const = default;
};

struct TokenDocument {
  std::string doc_id;
  std::vector<std::uint32_t> tokens;
};

struct PackingPolicy {
  std::uint32_t sequence_length = 4096;
  std::uint32_t pad_id = 0;
};

// Greedy in input order: whole documents are appended while they fit, else
// the sequence is closed and a new one opened. A document longer than L is
// cut into L-token chunks, each its own span; its tail chunk starts a fresh
// sequence that later documents may fill.
std::vector<PackedSequence> pack_documents(std::span<const TokenDocument> docs, const PackingPolicy& policy);

/// Block-diagonal causal attendability over one packed sequence. Holds only
/// span boundaries, so it is O(#spans) regardless of the sequence length.
class CrossDocMask {
 public:
  explicit CrossDocMask(const PackedSequence& seq);

  /// j <= i, both < pad_from, both inside the same span.
  bool operator()(std::size_t i, std::size_t j) const;
  std::size_t length() const { return length_; }

  /// Dense L x L mask. Only for L <= kMaxMaterializedMask.
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> materialize() const;

 private:
  std::size_t span_index(std::size_t pos) const;

  std::vector<std::uint32_t> span_ends_;
  std::uint32_t pad_from_ = 0;
  std::size_t length_ = 0;
};

inline CrossDocMask cross_doc_mask(const PackedSequence& seq) { return CrossDocMask(seq); }

// Binary pack file, little-endian:
//   "PACK" u32:version=1 u32:L u32:pad_id u64:count
//   per sequence: u32:pad_from u32:n_spans
//                 n_spans x (u32:begin u32:end u32:id_len id_bytes)
//                 L x u32:token
void write_packed(const std::filesystem::path& path, std::span<const PackedSequence> seqs,
                  const PackingPolicy& policy);
std::vector<PackedSequence> read_packed(const std::filesystem::path& path, PackingPolicy* policy = nullptr);

// ---------------------------------------------------------------------------
// Rotary position embeddings
// ---------------------------------------------------------------------------

enum class RopeStage { pretrain, ext1, ext2 };

struct RopeConfig {
  RopeStage stage = RopeStage::pretrain;
  std::uint32_t sequence_length = 4096;
  double theta = 1.0e4;
  std::uint32_t head_dim = 128;

  bool operator==(const RopeConfig&) const = default;
};

/// pretrain (4,096, 1e4), ext1 (32,768, 8e6), ext2 (131,072, 1.28e8).
RopeConfig rope_config(RopeStage stage, std::uint32_t head_dim = 128);
RopeStage rope_stage_from_string(const std::string& name);
std::string to_string(RopeStage stage);

/// omega_i = theta^(-2i/d), i in [0, d/2)
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rope_frequencies(const RopeConfig& cfg) {
  if (cfg.head_dim == 0 || cfg.head_dim % 2 != 0) throw ValidationError("rope: head_dim must be even and positive");
  const Eigen::Index half = cfg.head_dim / 2;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> omega(half);
  for (Eigen::Index i = 0; i < half; ++i)
    omega[i] = std::pow(static_cast<Scalar>(cfg.theta),
                        -static_cast<Scalar>(2 * i) / static_cast<Scalar>(cfg.head_dim));
  return omega;
}

/// Rotates each pair (v[2i], v[2i+1]) by position * omega_i.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> rope_rotate(const Eigen::MatrixBase<Derived>& v,
                                                                       std::int64_t position,
                                                                       const RopeConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Pairs = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;
  if (v.size() % 2 != 0) throw ValidationError("rope_rotate: vector length must be even");
  if (v.size() != static_cast<Eigen::Index>(cfg.head_dim))
    throw ValidationError("rope_rotate: vector length does not match head_dim");
  if (position < 0) throw ValidationError("rope_rotate: position must be >= 0");

  const Vec in = v;
  const Eigen::Index half = in.size() / 2;
  const Vec angle = static_cast<Scalar>(position) * rope_frequencies<Scalar>(cfg);
  const Vec c = angle.array().cos();
  const Vec s = angle.array().sin();

  Eigen::Map<const Pairs> pairs(in.data(), 2, half);
  Vec out(in.size());
  Eigen::Map<Pairs> rotated(out.data(), 2, half);
  rotated.row(0) = pairs.row(0).cwiseProduct(c.transpose()) - pairs.row(1).cwiseProduct(s.transpose());
  rotated.row(1) = pairs.row(0).cwiseProduct(s.transpose()) + pairs.row(1).cwiseProduct(c.transpose());
  return out;
}

}  // namespace curate
