#include "curate/dedup.hpp"

#include <algorithm>
#include <set>
#include <string_view>

#include "curate/error.hpp"
#include "curate/parallel.hpp"
#include "curate/text.hpp"
#include "curate/union_find.hpp"
#include "json.hpp"

namespace curate {

using nlohmann::json;
using nlohmann::ordered_json;

void DedupConfig::validate() const {
  std::vector<std::string> errors;
  if (shingle_width < 1) errors.emplace_back("dedup.shingle_width must be >= 1");
  if (permutations < 1) errors.emplace_back("dedup.permutations must be >= 1");
  if (bands * rows != permutations)
    errors.emplace_back("dedup: bands*rows (" + std::to_string(bands) + "*" + std::to_string(rows) +
                        ") != permutations (" + std::to_string(permutations) + ")");
  if (!(jaccard_threshold > 0.0 && jaccard_threshold <= 1.0))
    errors.emplace_back("dedup.jaccard_threshold must be in (0, 1]");
  if (top_k < 1) errors.emplace_back("dedup.top_k must be >= 1");
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

ShingleSet shingle(std::string_view text, std::size_t width) {
  if (width < 1) throw ValidationError("shingle width must be >= 1");
  const std::string lowered = text::to_lower(text);
  const auto words = text::split_words(lowered);
  ShingleSet out;
  out.width = width;
  if (words.empty()) return out;

  auto window_hash = [&](std::size_t begin, std::size_t count) {
    std::string joined;
    for (std::size_t i = begin; i < begin + count; ++i) {
      if (i != begin) joined.push_back(' ');
      joined.append(words[i]);
    }
    return hash64(joined);
  };

  if (words.size() < width) {
    out.hashes.push_back(window_hash(0, words.size()));
    return out;
  }
  out.hashes.reserve(words.size() - width + 1);
  for (std::size_t i = 0; i + width <= words.size(); ++i) out.hashes.push_back(window_hash(i, width));
  std::sort(out.hashes.begin(), out.hashes.end());
  out.hashes.erase(std::unique(out.hashes.begin(), out.hashes.end()), out.hashes.end());
  return out;
}

double jaccard(const ShingleSet& a, const ShingleSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto i = a.hashes.begin();
  auto j = b.hashes.begin();
  while (i != a.hashes.end() && j != b.hashes.end()) {
    if (*i < *j) ++i;
    else if (*j < *i) ++j;
    else ++inter, ++i, ++j;
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

std::uint64_t permutation_key(std::uint64_t seed, std::size_t i) {
  return mix64(seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(i) + 1));
}

}  // namespace

MinHashSignature minhash_signature(const ShingleSet& shingles, const DedupConfig& cfg) {
  if (shingles.empty()) throw Error("minhash_signature: empty shingle set");
  MinHashSignature sig;
  sig.perm_seed = cfg.perm_seed;
  sig.values.assign(cfg.permutations, ~std::uint64_t{0});
  for (std::size_t p = 0; p < cfg.permutations; ++p) {
    const std::uint64_t key = permutation_key(cfg.perm_seed, p);
    std::uint64_t best = ~std::uint64_t{0};
    for (std::uint64_t x : shingles.hashes) best = std::min(best, mix64(x ^ key));
    sig.values[p] = best;
  }
  return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.values.size() != b.values.size() || a.perm_seed != b.perm_seed)
    throw ValidationError("estimate_jaccard: signatures built with different configurations");
  if (a.values.empty()) return 1.0;
  std::size_t equal = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) equal += a.values[i] == b.values[i];
  return static_cast<double>(equal) / static_cast<double>(a.values.size());
}

std::vector<IdPair> lsh_candidate_pairs(std::span<const KeyedSignature> signatures, const DedupConfig& cfg,
                                        unsigned workers) {
  if (cfg.bands * cfg.rows != cfg.permutations)
    throw ValidationError("lsh: bands*rows must equal permutations");
  for (const auto& s : signatures)
    if (s.signature.values.size() != cfg.permutations || s.signature.perm_seed != cfg.perm_seed)
      throw ValidationError("lsh: signature for " + s.doc_id + " does not match the configuration");

  const std::size_t n = signatures.size();
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> per_band(cfg.bands);
  parallel_for(cfg.bands, workers, [&](std::size_t band) {
    const std::size_t lo = band * cfg.rows;
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t h = band;
      for (std::size_t r = 0; r < cfg.rows; ++r) h = hash_combine(h, signatures[i].signature.values[lo + r]);
      keyed[i] = {h, i};
    }
    std::sort(keyed.begin(), keyed.end());
    auto same_rows = [&](std::size_t a, std::size_t b) {
      const auto& va = signatures[a].signature.values;
      const auto& vb = signatures[b].signature.values;
      return std::equal(va.begin() + static_cast<std::ptrdiff_t>(lo),
                        va.begin() + static_cast<std::ptrdiff_t>(lo + cfg.rows),
                        vb.begin() + static_cast<std::ptrdiff_t>(lo));
    };
    auto& out = per_band[band];
    for (std::size_t begin = 0; begin < n;) {
      std::size_t end = begin + 1;
      while (end < n && keyed[end].first == keyed[begin].first) ++end;
      for (std::size_t x = begin; x < end; ++x)
        for (std::size_t y = x + 1; y < end; ++y)
          if (same_rows(keyed[x].second, keyed[y].second)) out.emplace_back(keyed[x].second, keyed[y].second);
      begin = end;
    }
  });

  std::vector<IdPair> pairs;
  for (const auto& band : per_band) {
    for (auto [a, b] : band) {
      const auto& ida = signatures[a].doc_id;
      const auto& idb = signatures[b].doc_id;
      if (ida == idb) continue;
      if (ida < idb) pairs.emplace_back(ida, idb);
      else pairs.emplace_back(idb, ida);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

FrequencySignals frequency_signals(std::span<const std::string> member_ids, const Corpus& corpus) {
  std::set<std::string_view> snapshots;
  std::set<std::string_view> domains;
  for (const auto& id : member_ids) {
    const Document* doc = corpus.find(id);
    if (!doc) throw ValidationError("unknown doc_id in cluster: " + id);
    snapshots.insert(doc->snapshot_id);
    domains.insert(doc->domain);
  }
  return {member_ids.size(), snapshots.size(), domains.size()};
}

namespace {

std::vector<ShingleSet> shingle_corpus(const Corpus& corpus, std::size_t width, unsigned workers) {
  std::vector<ShingleSet> shingles(corpus.size());
  parallel_for(corpus.size(), workers,
               [&](std::size_t i) { shingles[i] = shingle(corpus.documents[i].text, width); });
  return shingles;
}

std::vector<DuplicateCluster> cluster_components(const Corpus& corpus, std::span<const ShingleSet> shingles,
                                                 std::span<const IdPair> candidate_pairs, const DedupConfig& cfg,
                                                 unsigned workers, DedupStats* stats) {
  const std::size_t n = corpus.size();
  std::vector<std::pair<std::size_t, std::size_t>> edges(candidate_pairs.size());
  for (std::size_t e = 0; e < candidate_pairs.size(); ++e) {
    const auto a = corpus.index_of(candidate_pairs[e].first);
    const auto b = corpus.index_of(candidate_pairs[e].second);
    if (a == std::string_view::npos || b == std::string_view::npos)
      throw ValidationError("candidate pair references unknown doc_id");
    edges[e] = {a, b};
  }
  std::vector<char> keep(edges.size(), 0);
  parallel_for(edges.size(), workers, [&](std::size_t e) {
    keep[e] = jaccard(shingles[edges[e].first], shingles[edges[e].second]) >= cfg.jaccard_threshold;
  });

  UnionFind uf(n);
  std::size_t verified = 0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!keep[e]) continue;
    ++verified;
    uf.unite(edges[e].first, edges[e].second);
  }

  // Exact duplicates bypass LSH entirely.
  std::vector<std::size_t> by_hash(n);
  for (std::size_t i = 0; i < n; ++i) by_hash[i] = i;
  std::sort(by_hash.begin(), by_hash.end(), [&](std::size_t a, std::size_t b) {
    const auto& ha = corpus.documents[a].content_hash;
    const auto& hb = corpus.documents[b].content_hash;
    return ha != hb ? ha < hb : a < b;
  });
  for (std::size_t i = 1; i < n; ++i)
    if (corpus.documents[by_hash[i]].content_hash == corpus.documents[by_hash[i - 1]].content_hash)
      uf.unite(by_hash[i], by_hash[i - 1]);

  std::vector<std::size_t> slot(n, std::string_view::npos);
  std::vector<DuplicateCluster> clusters;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = uf.find(i);
    if (slot[root] == std::string_view::npos) {
      slot[root] = clusters.size();
      clusters.emplace_back();
      clusters.back().cluster_id = corpus.documents[root].doc_id;
    }
    clusters[slot[root]].member_ids.push_back(corpus.documents[i].doc_id);
  }
  for (auto& c : clusters) c.signals = frequency_signals(c.member_ids, corpus);

  if (stats) {
    stats->documents = n;
    stats->candidate_pairs = candidate_pairs.size();
    stats->verified_edges = verified;
    stats->clusters = clusters.size();
  }
  return clusters;
}

}  // namespace

std::vector<DuplicateCluster> build_clusters(const Corpus& corpus, std::span<const IdPair> candidate_pairs,
                                             const DedupConfig& cfg, unsigned workers) {
  cfg.validate();
  const auto shingles = shingle_corpus(corpus, cfg.shingle_width, workers);
  return cluster_components(corpus, shingles, candidate_pairs, cfg, workers, nullptr);
}

bool default_variant_rank(const Document& a, const Document& b) {
  if (a.text.size() != b.text.size()) return a.text.size() > b.text.size();
  return a.doc_id < b.doc_id;
}

DuplicateCluster retain_top_k(DuplicateCluster cluster, const Corpus& corpus, const DedupConfig& cfg,
                              const VariantRank& rank) {
  std::vector<const Document*> members;
  members.reserve(cluster.member_ids.size());
  for (const auto& id : cluster.member_ids) {
    const Document* doc = corpus.find(id);
    if (!doc) throw ValidationError("unknown doc_id in cluster: " + id);
    members.push_back(doc);
  }
  const std::size_t keep = std::min(cfg.top_k, members.size());
  std::partial_sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(keep), members.end(),
                    [&](const Document* a, const Document* b) { return rank(*a, *b); });
  cluster.retained_ids.clear();
  for (std::size_t i = 0; i < keep; ++i) cluster.retained_ids.push_back(members[i]->doc_id);
  return cluster;
}

DedupResult deduplicate(const Corpus& corpus, const DedupConfig& cfg, unsigned workers) {
  cfg.validate();
  const auto shingles = shingle_corpus(corpus, cfg.shingle_width, workers);
  std::vector<KeyedSignature> signatures(corpus.size());
  parallel_for(corpus.size(), workers, [&](std::size_t i) {
    signatures[i].doc_id = corpus.documents[i].doc_id;
    signatures[i].signature = minhash_signature(shingles[i], cfg);
  });
  const auto pairs = lsh_candidate_pairs(signatures, cfg, workers);

  DedupResult result;
  result.clusters = cluster_components(corpus, shingles, pairs, cfg, workers, &result.stats);
  parallel_for(result.clusters.size(), workers, [&](std::size_t c) {
    result.clusters[c] = retain_top_k(std::move(result.clusters[c]), corpus, cfg);
  });
  for (const auto& c : result.clusters) result.stats.retained += c.retained_ids.size();
  return result;
}

void annotate_clusters(Corpus& corpus, std::span<const DuplicateCluster> clusters) {
  for (const auto& c : clusters) {
    for (const auto& id : c.member_ids) {
      Document* doc = corpus.find(id);
      if (!doc) throw ValidationError("unknown doc_id in cluster: " + id);
      auto pos = std::find(c.retained_ids.begin(), c.retained_ids.end(), id);
      doc->extra["cluster_id"] = c.cluster_id;
      doc->extra["retained_rank"] =
          pos == c.retained_ids.end() ? "-1" : std::to_string(pos - c.retained_ids.begin());
      doc->extra["freq:occurrence"] = std::to_string(c.signals.occurrence_count);
      doc->extra["freq:snapshot"] = std::to_string(c.signals.snapshot_count);
      doc->extra["freq:domain"] = std::to_string(c.signals.domain_count);
    }
  }
}

std::string cluster_to_json(const DuplicateCluster& c) {
  ordered_json j;
  j["cluster_id"] = c.cluster_id;
  j["member_ids"] = c.member_ids;
  j["retained_ids"] = c.retained_ids;
  j["occurrence_count"] = c.signals.occurrence_count;
  j["snapshot_count"] = c.signals.snapshot_count;
  j["domain_count"] = c.signals.domain_count;
  return j.dump();
}

DuplicateCluster cluster_from_json(std::string_view line) {
  json j = json::parse(line);
  DuplicateCluster c;
  c.cluster_id = j.at("cluster_id").get<std::string>();
  c.member_ids = j.at("member_ids").get<std::vector<std::string>>();
  c.retained_ids = j.at("retained_ids").get<std::vector<std::string>>();
  c.signals.occurrence_count = j.at("occurrence_count").get<std::size_t>();
  c.signals.snapshot_count = j.at("snapshot_count").get<std::size_t>();
  c.signals.domain_count = j.at("domain_count").get<std::size_t>();
  return c;
}

void write_clusters(const std::filesystem::path& path, std::span<const DuplicateCluster> clusters) {
  std::string body;
  for (const auto& c : clusters) {
    body += cluster_to_json(c);
    body.push_back('\n');
  }
  write_file(path, body);
}

std::vector<DuplicateCluster> read_clusters(const std::filesystem::path& path) {
  std::vector<DuplicateCluster> clusters;
  for (const auto& line : read_lines(path))
    if (!line.empty()) clusters.push_back(cluster_from_json(line));
  return clusters;
}

}  // namespace curate
