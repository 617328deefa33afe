#include "curate/train_prep.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

namespace curate {

void LrScheduleSpec::validate() const {
  std::vector<std::string> errors;
  if (!(warmup_end > 0 && warmup_end <= constant_end && constant_end <= slow_decay_end && slow_decay_end <= end))
    errors.emplace_back("lr schedule: need 0 < W <= C <= S <= E");
  if (!(peak_lr >= 0.0 && slow_decay_lr >= 0.0 && end_lr >= 0.0))
    errors.emplace_back("lr schedule: rates must be >= 0");
  if (!(slow_decay_lr <= peak_lr && end_lr <= slow_decay_lr))
    errors.emplace_back("lr schedule: rates must not increase after warmup");
  if (errors.empty() && slow_decay_end > constant_end && end > slow_decay_end) {
    const double slow = (peak_lr - slow_decay_lr) / static_cast<double>(slow_decay_end - constant_end);
    const double fast = (slow_decay_lr - end_lr) / static_cast<double>(end - slow_decay_end);
    if (fast < slow) errors.emplace_back("lr schedule: fast-decay slope must be at least the slow-decay slope");
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

namespace {

double lerp_between(std::int64_t step, std::int64_t x0, double y0, std::int64_t x1, double y1) {
  if (x1 == x0) return y1;
  const double t = static_cast<double>(step - x0) / static_cast<double>(x1 - x0);
  return y0 + (y1 - y0) * t;
}

}  // namespace

LrPhase lr_phase(std::int64_t step, const LrScheduleSpec& spec) {
  if (step < 0 || step > spec.end) throw ValidationError("lr_at: step outside [0, E]");
  if (step <= spec.warmup_end) return LrPhase::warmup;
  if (step <= spec.constant_end) return LrPhase::constant;
  if (step <= spec.slow_decay_end) return LrPhase::slow_decay;
  return LrPhase::fast_decay;
}

double lr_at(std::int64_t step, const LrScheduleSpec& spec) {
  switch (lr_phase(step, spec)) {
    case LrPhase::warmup:
      return lerp_between(step, 0, 0.0, spec.warmup_end, spec.peak_lr);
    case LrPhase::constant:
      return spec.peak_lr;
    case LrPhase::slow_decay:
      return lerp_between(step, spec.constant_end, spec.peak_lr, spec.slow_decay_end, spec.slow_decay_lr);
    case LrPhase::fast_decay:
      return lerp_between(step, spec.slow_decay_end, spec.slow_decay_lr, spec.end, spec.end_lr);
  }
  return 0.0;
}

std::string to_string(LrPhase phase) {
  switch (phase) {
    case LrPhase::warmup: return "warmup";
    case LrPhase::constant: return "constant";
    case LrPhase::slow_decay: return "slow_decay";
    case LrPhase::fast_decay: return "fast_decay";
  }
  return "warmup";
}

std::string schedule_csv(const LrScheduleSpec& spec, std::int64_t stride) {
  spec.validate();
  stride = std::max<std::int64_t>(1, stride);
  std::ostringstream out;
  out.precision(17);
  out << "step,lr,phase\n";
  auto row = [&](std::int64_t s) { out << s << ',' << lr_at(s, spec) << ',' << to_string(lr_phase(s, spec)) << '\n'; };
  for (std::int64_t s = 0; s <= spec.end; s += stride) row(s);
  if (spec.end % stride != 0) row(spec.end);
  return out.str();
}

// ---------------------------------------------------------------------------

std::vector<PackedSequence> pack_documents(std::span<const TokenDocument> docs, const PackingPolicy& policy) {
  const std::uint32_t L = policy.sequence_length;
  if (L < 1 || L > kMaxSequenceLength)
    throw ValidationError("pack: sequence length must be in [1, " + std::to_string(kMaxSequenceLength) + "]");

  std::vector<PackedSequence> out;
  PackedSequence open;
  auto close = [&] {
    if (open.spans.empty()) return;
    open.pad_from = static_cast<std::uint32_t>(open.token_ids.size());
    open.token_ids.resize(L, policy.pad_id);
    out.push_back(std::move(open));
    open = PackedSequence{};
  };
  auto append = [&](const std::string& id, const std::uint32_t* first, std::size_t n) {
    const auto begin = static_cast<std::uint32_t>(open.token_ids.size());
    open.token_ids.insert(open.token_ids.end(), first, first + n);
    open.spans.push_back({begin, static_cast<std::uint32_t>(begin + n), id});
  };

  for (const auto& doc : docs) {
    if (doc.tokens.empty()) throw ValidationError("pack: document " + doc.doc_id + " has no tokens");
    const std::size_t n = doc.tokens.size();
    if (n <= L) {
      if (open.token_ids.size() + n > L) close();
      append(doc.doc_id, doc.tokens.data(), n);
      if (open.token_ids.size() == L) close();
      continue;
    }
    close();
    std::size_t offset = 0;
    for (; offset + L <= n; offset += L) {
      append(doc.doc_id, doc.tokens.data() + offset, L);
      close();
    }
    if (offset < n) append(doc.doc_id, doc.tokens.data() + offset, n - offset);
  }
  close();
  return out;
}

CrossDocMask::CrossDocMask(const PackedSequence& seq) : pad_from_(seq.pad_from), length_(seq.token_ids.size()) {
  std::uint32_t expect = 0;
  for (const auto& s : seq.spans) {
    if (s.begin != expect || s.end <= s.begin) throw ValidationError("mask: spans must be contiguous and non-empty");
    span_ends_.push_back(s.end);
    expect = s.end;
  }
  if (expect != pad_from_ || pad_from_ > length_) throw ValidationError("mask: spans must cover [0, pad_from)");
}

std::size_t CrossDocMask::span_index(std::size_t pos) const {
  return static_cast<std::size_t>(std::upper_bound(span_ends_.begin(), span_ends_.end(), pos) - span_ends_.begin());
}

bool CrossDocMask::operator()(std::size_t i, std::size_t j) const {
  if (j > i || i >= pad_from_) return false;
  return span_index(i) == span_index(j);
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> CrossDocMask::materialize() const {
  if (length_ > kMaxMaterializedMask)
    throw ValidationError("mask: refusing to materialise a dense mask longer than " +
                          std::to_string(kMaxMaterializedMask));
  const auto n = static_cast<Eigen::Index>(length_);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> m = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
  std::uint32_t begin = 0;
  for (std::uint32_t end : span_ends_) {
    for (std::uint32_t i = begin; i < end; ++i)
      for (std::uint32_t j = begin; j <= i; ++j) m(i, j) = true;
    begin = end;
  }
  return m;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kPackMagic[4] = {'P', 'A', 'C', 'K'};
constexpr std::uint32_t kPackVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw IntegrityError("pack file truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)]);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)]);
    pos += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void write_packed(const std::filesystem::path& path, std::span<const PackedSequence> seqs,
                  const PackingPolicy& policy) {
  std::string out(kPackMagic, 4);
  put_u32(out, kPackVersion);
  put_u32(out, policy.sequence_length);
  put_u32(out, policy.pad_id);
  put_u64(out, seqs.size());
  for (const auto& s : seqs) {
    if (s.length() != policy.sequence_length) throw ValidationError("write_packed: sequence length mismatch");
    put_u32(out, s.pad_from);
    put_u32(out, static_cast<std::uint32_t>(s.spans.size()));
    for (const auto& sp : s.spans) {
      put_u32(out, sp.begin);
      put_u32(out, sp.end);
      put_u32(out, static_cast<std::uint32_t>(sp.doc_id.size()));
      out += sp.doc_id;
    }
    for (auto t : s.token_ids) put_u32(out, t);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<PackedSequence> read_packed(const std::filesystem::path& path, PackingPolicy* policy) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IntegrityError("cannot open pack file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string buf = std::move(ss).str();
  Reader r{buf};
  if (r.bytes(4) != std::string(kPackMagic, 4)) throw IntegrityError("not a pack file: " + path.string());
  if (r.u32() != kPackVersion) throw IntegrityError("unsupported pack version");
  PackingPolicy p;
  p.sequence_length = r.u32();
  p.pad_id = r.u32();
  const std::uint64_t count = r.u64();
  std::vector<PackedSequence> seqs;
  for (std::uint64_t k = 0; k < count; ++k) {
    PackedSequence s;
    s.pad_from = r.u32();
    const std::uint32_t spans = r.u32();
    for (std::uint32_t i = 0; i < spans; ++i) {
      DocSpan sp;
      sp.begin = r.u32();
      sp.end = r.u32();
      sp.doc_id = r.bytes(r.u32());
      s.spans.push_back(std::move(sp));
    }
    s.token_ids.resize(p.sequence_length);
    for (auto& t : s.token_ids) t = r.u32();
    seqs.push_back(std::move(s));
  }
  if (policy) *policy = p;
  return seqs;
}

// ---------------------------------------------------------------------------

RopeConfig rope_config(RopeStage stage, std::uint32_t head_dim) {
  if (head_dim == 0 || head_dim % 2 != 0) throw ValidationError("rope: head_dim must be even and positive");
  switch (stage) {
    case RopeStage::pretrain: return {stage, 4096, 1.0e4, head_dim};
    case RopeStage::ext1: return {stage, 32768, 8.0e6, head_dim};
    case RopeStage::ext2: return {stage, 131072, 1.28e8, head_dim};
  }
  throw ValidationError("rope: unknown stage");
}

RopeStage rope_stage_from_string(const std::string& name) {
  if (name == "pretrain") return RopeStage::pretrain;
  if (name == "ext1") return RopeStage::ext1;
  if (name == "ext2") return RopeStage::ext2;
  throw ValidationError("rope: unknown stage '" + name + "' (expected pretrain, ext1 or ext2)");
}

std::string to_string(RopeStage stage) {
  switch (stage) {
    case RopeStage::pretrain: return "pretrain";
    case RopeStage::ext1: return "ext1";
    case RopeStage::ext2: return "ext2";
  }
  return "pretrain";
}

}  // namespace curate
