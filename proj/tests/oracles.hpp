#pragma once

// Brute-force reference implementations used only by tests. They share no
// code with the library beyond the data types.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

inline std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) {
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(w);
  }
  return out;
}

/// Shingles as joined strings; texts shorter than w give one shingle.
inline std::set<std::string> shingles(const std::string& text, std::size_t w) {
  const auto ws = words(text);
  std::set<std::string> out;
  auto join = [&](std::size_t b, std::size_t e) {
    std::string s;
    for (std::size_t i = b; i < e; ++i) s += (i > b ? " " : "") + ws[i];
    return s;
  };
  if (ws.empty()) return out;
  if (ws.size() < w) {
    out.insert(join(0, ws.size()));
    return out;
  }
  for (std::size_t i = 0; i + w <= ws.size(); ++i) out.insert(join(i, i + w));
  return out;
}

template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

/// Component label per node (smallest node index in the component), by BFS.
inline std::vector<std::size_t> components(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<std::size_t> label(n, n);
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != n) continue;
    std::vector<std::size_t> stack{s};
    label[s] = s;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto u : adj[v])
        if (label[u] == n) {
          label[u] = s;
          stack.push_back(u);
        }
    }
  }
  return label;
}

/// The three-clause mask rule evaluated from span boundaries directly.
inline bool mask(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& spans, std::uint32_t pad_from,
                 std::size_t i, std::size_t j) {
  if (j > i) return false;
  if (i >= pad_from || j >= pad_from) return false;
  for (auto [b, e] : spans)
    if (i >= b && i < e) return j >= b && j < e;
  return false;
}

/// Closed-form value of the four-phase schedule at step t.
inline double lr(double t, double peak, double W, double C, double S, double lr_s, double E, double lr_e) {
  if (t <= W) return peak * t / W;
  if (t <= C) return peak;
  if (t <= S) return peak + (lr_s - peak) * (t - C) / (S - C);
  return lr_s + (lr_e - lr_s) * (t - S) / (E - S);
}

}  // namespace oracle
