#pragma once

// From a fitted chain to a feasible graph: decode each observation's most
// likely order, insert consecutive edges, and score edges by stationary
// joint probability.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "nico/exact_estep.hpp"
#include "nico/graph.hpp"
#include "nico/model.hpp"
#include "nico/rng.hpp"
#include "nico/sampler.hpp"

namespace nico {

struct DecodeOptions {
  int exact_cap = kDefaultEnumerationCap;
  std::size_t samples = 2000;
  Scheme scheme = Scheme::Causal;
};

struct DecodedOrder {
  Permutation perm;
  double log_prob = kNegInf;
  bool exact = true;
  double best_sample_log_prob = kNegInf;  // heuristic path only
};

/// Improves an ordering by pairwise position swaps until no swap helps.
/// Under KnownEndpoints the first and last steps stay fixed.
inline double swap_hill_climb(const MarkovModel& m, const Observation& obs, Permutation& perm) {
  const std::size_t n = obs.size();
  double best = path_log_prob(m, unshuffle(obs, perm));
  const std::size_t lo = obs.known_endpoints() ? 1 : 0;
  const std::size_t hi = obs.known_endpoints() && n >= 2 ? n - 1 : n;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t a = lo; a < hi; ++a)
      for (std::size_t b = a + 1; b < hi; ++b) {
        std::swap(perm.tau[a], perm.tau[b]);
        double lp = path_log_prob(m, unshuffle(obs, perm));
        if (lp > best) {
          best = lp;
          improved = true;
        } else {
          std::swap(perm.tau[a], perm.tau[b]);
        }
      }
  }
  return best;
}

/// Most probable ordering. Exact within the enumeration cap; above it the
/// best of `samples` importance draws refined by swap hill climbing.
inline DecodedOrder most_likely_order(const MarkovModel& m, const Observation& obs,
                                      const DecodeOptions& opt, Rng& rng) {
  DecodedOrder out;
  if (static_cast<int>(obs.size()) <= opt.exact_cap) {
    auto [perm, lp] = exact_best_order(m, obs, opt.exact_cap);
    if (lp == kNegInf) throw UnsupportedObservation("every ordering of the observation has zero probability");
    out.perm = std::move(perm);
    out.log_prob = lp;
    return out;
  }
  out.exact = false;
  bool found = false;
  for (std::size_t i = 0; i < std::max<std::size_t>(opt.samples, 1); ++i) {
    auto s = draw_sample(opt.scheme, m, obs, rng);
    if (s.log_target_unnorm > out.best_sample_log_prob || !found) {
      if (s.log_target_unnorm == kNegInf) continue;
      out.best_sample_log_prob = s.log_target_unnorm;
      out.perm = s.perm;
      found = true;
    }
  }
  if (!found) throw UnsupportedObservation("no sampled ordering has positive probability");
  out.log_prob = swap_hill_climb(m, obs, out.perm);
  return out;
}

/// Union of consecutive pairs over ordered paths.
inline DirectedGraph build_graph(std::span<const std::vector<int>> paths, const StateSpace& states) {
  DirectedGraph g(states);
  for (const auto& z : paths)
    for (std::size_t t = 1; t < z.size(); ++t) g.add_edge(z[t - 1], z[t]);
  return g;
}

/// True iff each observation, in the given order, is an edge-consecutive path.
inline bool feasibility_check(const DirectedGraph& g, std::span<const Observation> obs,
                              std::span<const Permutation> orders) {
  if (obs.size() != orders.size()) throw std::invalid_argument("feasibility_check: size mismatch");
  for (std::size_t m = 0; m < obs.size(); ++m) {
    auto z = unshuffle(obs[m], orders[m]);
    for (std::size_t t = 1; t < z.size(); ++t)
      if (!g.has_edge(z[t - 1], z[t])) return false;
  }
  return true;
}

struct StationaryResult {
  std::vector<double> pi;
  bool damped = false;
  bool multiple = false;  // more than one closed class: not unique
  std::size_t iterations = 0;
};

namespace detail {

// Number of closed communicating classes of the support graph of A.
inline std::size_t closed_class_count(const Matrix& A) {
  const std::size_t n = A.rows();
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  int counter = 0;
  int n_comp = 0;
  // Iterative Tarjan.
  struct Frame {
    std::size_t v;
    std::size_t next;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& f = call.back();
      if (f.next < n) {
        std::size_t w = f.next++;
        if (!(A(f.v, w) > 0.0)) continue;
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      std::size_t v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        for (;;) {
          std::size_t w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = n_comp;
          if (w == v) break;
        }
        ++n_comp;
      }
    }
  }
  std::vector<char> leaves(static_cast<std::size_t>(n_comp), 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (A(i, j) > 0.0 && comp[i] != comp[j]) leaves[static_cast<std::size_t>(comp[i])] = 1;
  std::size_t closed = 0;
  for (char l : leaves) closed += l ? 0 : 1;
  return closed;
}

inline bool power_iterate(const Matrix& A, double damping, std::vector<double>& x, std::size_t max_iter,
                          double tol, std::size_t& iters) {
  const std::size_t n = A.rows();
  const double teleport = (1.0 - damping) / static_cast<double>(n);
  std::vector<double> next(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::fill(next.begin(), next.end(), teleport);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = damping * x[i];
      if (xi == 0.0) continue;
      auto row = A.row(i);
      for (std::size_t j = 0; j < n; ++j) next[j] += xi * row[j];
    }
    double s = 0.0;
    for (double v : next) s += v;
    double diff = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      next[j] /= s;
      diff = std::max(diff, std::abs(next[j] - x[j]));
    }
    x.swap(next);
    ++iters;
    if (diff < tol) return true;
  }
  return false;
}

}  // namespace detail

inline constexpr double kStationaryDamping = 0.999;

/// Stationary distribution by power iteration from uniform. Chains that do
/// not converge (periodic or slowly mixing) are damped toward uniform.
inline StationaryResult stationary_distribution(const Matrix& A, std::size_t max_iter = 100000,
                                                double tol = 1e-13) {
  const std::size_t n = A.rows();
  if (n == 0 || A.cols() != n) throw std::invalid_argument("stationary_distribution: A must be square");
  StationaryResult r;
  r.multiple = detail::closed_class_count(A) > 1;
  r.pi.assign(n, 1.0 / static_cast<double>(n));
  if (detail::power_iterate(A, 1.0, r.pi, max_iter, tol, r.iterations)) return r;
  r.damped = true;
  r.pi.assign(n, 1.0 / static_cast<double>(n));
  if (detail::power_iterate(A, kStationaryDamping, r.pi, max_iter, tol, r.iterations)) return r;
  throw std::runtime_error("stationary_distribution: power iteration did not converge");
}

/// Joint edge scores stationary_i * A_ij; they sum to one.
inline Matrix edge_joint_scores(const MarkovModel& m) {
  auto st = stationary_distribution(m.A);
  const std::size_t n = m.A.rows();
  Matrix s(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = st.pi[i] * m.A(i, j);
  return s;
}

}  // namespace nico
