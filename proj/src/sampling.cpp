#include "curate/sampling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "curate/error.hpp"
#include "json.hpp"

namespace curate {

using nlohmann::json;
using nlohmann::ordered_json;

double UpsampleTransform::operator()(double value) const {
  switch (kind) {
    case TransformKind::identity:
      return value;
    case TransformKind::threshold:
      return value >= threshold ? boost : 1.0;
    case TransformKind::log2_sublinear: {
      const double c = std::max(value, 1.0);
      double level;
      if (c < 0x1p63 && c == std::floor(c)) level = static_cast<double>(std::bit_width(static_cast<std::uint64_t>(c)) - 1);
      else level = std::floor(std::log2(c));
      return std::min(1.0 + level, cap);
    }
  }
  return value;
}

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::identity: return "identity";
    case TransformKind::threshold: return "threshold";
    case TransformKind::log2_sublinear: return "log2_sublinear";
  }
  return "identity";
}

TransformKind transform_kind_from_string(const std::string& name) {
  if (name == "identity") return TransformKind::identity;
  if (name == "threshold") return TransformKind::threshold;
  if (name == "log2_sublinear") return TransformKind::log2_sublinear;
  throw ValidationError("unknown upsampling transform '" + name + "'");
}

WeightMap build_weight_map(std::span<const AnnotatedDocument> docs, const UpsamplePolicy& policy) {
  WeightMap map;
  map.signal = policy.signal;
  map.doc_ids.reserve(docs.size());
  map.weights.resize(static_cast<Eigen::Index>(docs.size()));
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return docs[a].doc.doc_id < docs[b].doc.doc_id; });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& d = docs[order[k]];
    auto it = d.signals.values.find(policy.signal);
    if (it == d.signals.values.end())
      throw ValidationError("unknown signal '" + policy.signal + "' (absent on " + d.doc.doc_id + ")");
    const double w = policy.transform(it->second);
    if (!std::isfinite(w) || w < 0.0)
      throw ValidationError("signal '" + policy.signal + "' produced an invalid weight for " + d.doc.doc_id);
    map.doc_ids.push_back(d.doc.doc_id);
    map.weights[static_cast<Eigen::Index>(k)] = w;
  }
  return map;
}

double MergedDistribution::probability(const std::string& doc_id) const {
  auto it = std::lower_bound(doc_ids.begin(), doc_ids.end(), doc_id);
  if (it == doc_ids.end() || *it != doc_id) return 0.0;
  return probabilities[it - doc_ids.begin()];
}

MergedDistribution MergedDistribution::restricted(const std::function<bool(const std::string&)>& keep) const {
  MergedDistribution out;
  out.mixture_weights = mixture_weights;
  std::vector<double> p;
  for (std::size_t i = 0; i < doc_ids.size(); ++i) {
    if (!keep(doc_ids[i])) continue;
    out.doc_ids.push_back(doc_ids[i]);
    p.push_back(probabilities[static_cast<Eigen::Index>(i)]);
  }
  out.probabilities = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
  const double mass = out.probabilities.sum();
  if (!(mass > 0.0)) throw ValidationError("restricted distribution has no probability mass");
  out.probabilities /= mass;
  return out;
}

MergedDistribution merge_distributions(std::span<const WeightMap> maps, std::span<const double> lambdas) {
  if (maps.empty()) throw ValidationError("merge_distributions: no weight maps");
  if (maps.size() != lambdas.size()) throw ValidationError("merge_distributions: one lambda per map required");
  double lambda_sum = 0.0;
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("merge_distributions: lambda must be >= 0");
    lambda_sum += l;
  }
  if (std::abs(lambda_sum - 1.0) > 1e-9) throw ValidationError("merge_distributions: lambdas must sum to 1");

  MergedDistribution out;
  std::set<std::string> names;
  for (std::size_t s = 0; s < maps.size(); ++s) {
    const auto& m = maps[s];
    if (!names.insert(m.signal).second) throw ValidationError("merge_distributions: duplicate signal " + m.signal);
    if (static_cast<std::size_t>(m.weights.size()) != m.doc_ids.size())
      throw ValidationError("merge_distributions: malformed weight map " + m.signal);
    if (!m.weights.allFinite() || (m.weights.array() < 0.0).any())
      throw ValidationError("merge_distributions: negative or non-finite weight in " + m.signal);
    if (!(m.weights.sum() > 0.0)) throw ValidationError("merge_distributions: all-zero weight map for signal " + m.signal);
    out.mixture_weights[m.signal] = lambdas[s];
  }

  std::vector<std::string> ids;
  for (const auto& m : maps) ids.insert(ids.end(), m.doc_ids.begin(), m.doc_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  out.doc_ids = std::move(ids);
  out.probabilities = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out.doc_ids.size()));

  for (std::size_t s = 0; s < maps.size(); ++s) {
    const auto& m = maps[s];
    const Eigen::VectorXd p = m.weights / m.weights.sum();
    for (std::size_t k = 0; k < m.doc_ids.size(); ++k) {
      auto it = std::lower_bound(out.doc_ids.begin(), out.doc_ids.end(), m.doc_ids[k]);
      out.probabilities[it - out.doc_ids.begin()] += lambdas[s] * p[static_cast<Eigen::Index>(k)];
    }
  }
  return out;
}

std::vector<double> resolve_lambdas(std::span<const UpsamplePolicy> policies) {
  std::vector<double> out(policies.size(), 0.0);
  double fixed = 0.0;
  std::size_t unset = 0;
  for (const auto& p : policies) {
    if (p.lambda) fixed += *p.lambda;
    else ++unset;
  }
  const double share = unset ? (1.0 - fixed) / static_cast<double>(unset) : 0.0;
  for (std::size_t i = 0; i < policies.size(); ++i) out[i] = policies[i].lambda ? *policies[i].lambda : share;
  return out;
}

const std::string& select_variant(const DuplicateCluster& cluster, std::size_t repetition) {
  if (cluster.retained_ids.empty()) throw ValidationError("select_variant: cluster has no retained variants");
  return cluster.retained_ids[repetition % cluster.retained_ids.size()];
}

ClusterSampler::ClusterSampler(const MergedDistribution& dist, std::span<const DuplicateCluster> clusters) {
  std::unordered_map<std::string_view, std::size_t> owner;
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (const auto& id : clusters[c].retained_ids) owner.emplace(id, c);

  std::vector<double> mass(clusters.size(), 0.0);
  std::vector<char> present(clusters.size(), 0);
  for (std::size_t i = 0; i < dist.doc_ids.size(); ++i) {
    auto it = owner.find(dist.doc_ids[i]);
    if (it == owner.end())
      throw ValidationError("sampling: " + dist.doc_ids[i] + " is not a retained member of any cluster");
    mass[it->second] += dist.probabilities[static_cast<Eigen::Index>(i)];
    present[it->second] = 1;
  }
  double running = 0.0;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (!present[c] || !(mass[c] > 0.0)) continue;
    std::vector<std::string> variants;
    for (const auto& id : clusters[c].retained_ids)
      if (std::binary_search(dist.doc_ids.begin(), dist.doc_ids.end(), id)) variants.push_back(id);
    variants_.push_back(std::move(variants));
    running += mass[c];
    cumulative_.push_back(running);
  }
  if (variants_.empty()) throw ValidationError("sampling: distribution has no probability mass");
  repetitions_.assign(variants_.size(), 0);
}

std::string ClusterSampler::next(Rng& rng) {
  const double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  const auto c = static_cast<std::size_t>(it - cumulative_.begin());
  const auto& variants = variants_[c];
  return variants[repetitions_[c]++ % variants.size()];
}

std::vector<std::string> draw(const MergedDistribution& dist, std::span<const DuplicateCluster> clusters,
                              std::uint64_t seed, std::size_t n) {
  if (n < 1) throw ValidationError("draw: n must be >= 1");
  ClusterSampler sampler(dist, clusters);
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sampler.next(rng));
  return out;
}

void write_weights(const std::filesystem::path& path, std::span<const WeightMap> maps,
                   const MergedDistribution& dist) {
  std::string body;
  {
    ordered_json header;
    header["mixture_weights"] = dist.mixture_weights;
    header["documents"] = dist.doc_ids.size();
    body += header.dump();
    body.push_back('\n');
  }
  for (std::size_t i = 0; i < dist.doc_ids.size(); ++i) {
    ordered_json row;
    row["doc_id"] = dist.doc_ids[i];
    ordered_json w = ordered_json::object();
    for (const auto& m : maps) {
      auto it = std::lower_bound(m.doc_ids.begin(), m.doc_ids.end(), dist.doc_ids[i]);
      w[m.signal] = (it != m.doc_ids.end() && *it == dist.doc_ids[i]) ? m.weights[it - m.doc_ids.begin()] : 0.0;
    }
    row["weights"] = std::move(w);
    row["probability"] = dist.probabilities[static_cast<Eigen::Index>(i)];
    body += row.dump();
    body.push_back('\n');
  }
  write_file(path, body);
}

MergedDistribution read_weights(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw IntegrityError("weights file is empty: " + path.string());
  MergedDistribution dist;
  dist.mixture_weights = json::parse(lines[0]).at("mixture_weights").get<std::map<std::string, double>>();
  std::vector<double> p;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    json row = json::parse(lines[i]);
    dist.doc_ids.push_back(row.at("doc_id").get<std::string>());
    p.push_back(row.at("probability").get<double>());
  }
  dist.probabilities = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
  return dist;
}

}  // namespace curate
