#pragma once

// Frequency-method baseline: sort each path's interior by pairwise
// co-occurrence with its source and destination.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nico/graph.hpp"
#include "nico/model.hpp"
#include "nico/reconstruct.hpp"
#include "nico/rng.hpp"

namespace nico {

/// Symmetric count of observations containing both states of a pair.
class CooccurrenceCounts {
 public:
  int operator()(int a, int b) const {
    auto it = counts_.find(key(a, b));
    return it == counts_.end() ? 0 : it->second;
  }
  void add(int a, int b) {
    if (a != b) ++counts_[key(a, b)];
  }
  std::size_t pairs() const { return counts_.size(); }

 private:
  static std::pair<int, int> key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }
  std::map<std::pair<int, int>, int> counts_;
};

inline CooccurrenceCounts cooccurrence_counts(std::span<const Observation> obs) {
  CooccurrenceCounts c;
  for (const auto& o : obs)
    for (std::size_t i = 0; i < o.size(); ++i)
      for (std::size_t j = i + 1; j < o.size(); ++j) c.add(o.positions[i], o.positions[j]);
  return c;
}

/// score(v) for an interior vertex v of a path from s to d.
using FmScore = std::function<double(const CooccurrenceCounts&, int s, int v, int d)>;

inline double fm_default_score(const CooccurrenceCounts& c, int s, int v, int d) { return c(s, v) - c(v, d); }

/// Source first, destination last, interior by descending score. Each block of
/// equal scores is shuffled with `rng`.
inline Permutation fm_order(const Observation& obs, const CooccurrenceCounts& counts, Rng& rng,
                            const FmScore& score = fm_default_score) {
  if (!obs.known_endpoints()) throw std::invalid_argument("fm_order: observation must have known endpoints");
  const std::size_t n = obs.size();
  Permutation p = Permutation::identity(n);
  if (n <= 3) return p;
  const int s = obs.positions.front();
  const int d = obs.positions.back();
  std::vector<std::pair<double, int>> interior;
  for (std::size_t t = 1; t + 1 < n; ++t) interior.emplace_back(score(counts, s, obs.positions[t], d), static_cast<int>(t));
  std::stable_sort(interior.begin(), interior.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t lo = 0; lo < interior.size();) {
    std::size_t hi = lo + 1;
    while (hi < interior.size() && interior[hi].first == interior[lo].first) ++hi;
    rng.shuffle(std::span(interior.begin() + static_cast<std::ptrdiff_t>(lo), hi - lo));
    lo = hi;
  }
  for (std::size_t k = 0; k < interior.size(); ++k) p.tau[k + 1] = interior[k].second;
  return p;
}

struct FmResult {
  DirectedGraph graph;
  std::vector<Permutation> orders;
};

inline FmResult fm_reconstruct(std::span<const Observation> obs, const StateSpace& states, std::uint64_t seed,
                               const FmScore& score = fm_default_score) {
  const auto counts = cooccurrence_counts(obs);
  Rng rng(seed);
  FmResult out;
  std::vector<std::vector<int>> paths;
  for (const auto& o : obs) {
    out.orders.push_back(fm_order(o, counts, rng, score));
    paths.push_back(unshuffle(o, out.orders.back()));
  }
  out.graph = build_graph(paths, states);
  return out;
}

}  // namespace nico
