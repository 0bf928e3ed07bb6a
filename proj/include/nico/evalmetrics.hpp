#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "nico/graph.hpp"
#include "nico/reconstruct.hpp"

namespace nico {

struct SymDiff {
  std::size_t total = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

/// Compared by vertex label, so the graphs may index vertices differently.
inline SymDiff edge_symmetric_difference(const DirectedGraph& est, const DirectedGraph& ref) {
  const auto e = est.labeled_edges();
  const auto r = ref.labeled_edges();
  SymDiff d;
  for (const auto& x : e) d.false_positives += r.count(x) ? 0 : 1;
  for (const auto& x : r) d.false_negatives += e.count(x) ? 0 : 1;
  d.total = d.false_positives + d.false_negatives;
  return d;
}

inline DirectedGraph reference_graph_from_ordered(std::span<const std::vector<int>> paths, const StateSpace& states) {
  return build_graph(paths, states);
}

struct RunRecord {
  std::size_t edges = 0;
  std::size_t error = 0;
  double loglik = 0.0;
};

struct RunSummary {
  std::size_t min_error = 0;
  std::size_t median_error = 0;  // lower middle for an even count
  std::size_t max_error = 0;
  std::size_t min_edges = 0;
  std::size_t median_edges = 0;
  std::size_t max_edges = 0;
  std::size_t sparsest = 0;      // fewest edges, then lower error, then lower index
  std::size_t clairvoyant = 0;   // lowest error, then lower index
  std::size_t max_loglik = 0;    // highest loglik, then lower index
};

inline std::size_t lower_median(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

inline RunSummary summarize_runs(std::span<const RunRecord> runs) {
  if (runs.empty()) throw std::invalid_argument("summarize_runs: no runs");
  RunSummary s;
  std::vector<std::size_t> errs, edges;
  for (const auto& r : runs) {
    errs.push_back(r.error);
    edges.push_back(r.edges);
  }
  s.min_error = *std::min_element(errs.begin(), errs.end());
  s.max_error = *std::max_element(errs.begin(), errs.end());
  s.median_error = lower_median(errs);
  s.min_edges = *std::min_element(edges.begin(), edges.end());
  s.max_edges = *std::max_element(edges.begin(), edges.end());
  s.median_edges = lower_median(edges);
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto& a = runs[i];
    const auto& b = runs[s.sparsest];
    if (a.edges < b.edges || (a.edges == b.edges && a.error < b.error)) s.sparsest = i;
    if (a.error < runs[s.clairvoyant].error) s.clairvoyant = i;
    if (a.loglik > runs[s.max_loglik].loglik) s.max_loglik = i;
  }
  return s;
}

}  // namespace nico
