#pragma once

// Closed-form M-step updates from expected statistics.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nico/model.hpp"

namespace nico {

/// Dirichlet hyperparameters for pi (`u`) and each row of A (`v`). Entries
/// may be negative; u = v = 1 is the flat prior.
struct DirichletPriors {
  std::vector<double> u;
  Matrix v;

  static DirichletPriors constant(std::size_t n, double c) {
    return {std::vector<double>(n, c), Matrix(n, n, c)};
  }
};

class RowClippedError : public std::runtime_error {
 public:
  explicit RowClippedError(int row)
      : std::runtime_error(row < 0 ? "MAP update clipped every entry of pi to zero"
                                   : "MAP update clipped every entry of transition row " +
                                         std::to_string(row) + " to zero"),
        row_(row) {}
  int row() const { return row_; }

 private:
  int row_;
};

/// For each state, the states it shares at least one observation with.
inline std::vector<std::vector<int>> cooccurring_states(std::span<const Observation> obs,
                                                        std::size_t num_states) {
  std::vector<std::set<int>> sets(num_states);
  for (const auto& o : obs)
    for (int a : o.positions)
      for (int b : o.positions)
        if (a != b) sets[static_cast<std::size_t>(a)].insert(b);
  std::vector<std::vector<int>> out(num_states);
  for (std::size_t i = 0; i < num_states; ++i) out[i].assign(sets[i].begin(), sets[i].end());
  return out;
}

/// Expected counts: pi numerators and transition numerators (from, to).
struct ExpectedCounts {
  std::vector<double> initial;
  Matrix transitions;
};

inline ExpectedCounts expected_counts(std::span<const SufficientStats> stats,
                                      std::span<const Observation> obs, std::size_t num_states) {
  if (stats.size() != obs.size()) throw std::invalid_argument("mstep: stats/observations size mismatch");
  ExpectedCounts c{std::vector<double>(num_states, 0.0), Matrix(num_states, num_states, 0.0)};
  for (std::size_t m = 0; m < obs.size(); ++m) {
    const auto& y = obs[m].positions;
    const auto& s = stats[m];
    if (s.size() != y.size()) throw std::invalid_argument("mstep: stats dimension does not match observation");
    for (std::size_t to = 0; to < y.size(); ++to) {
      c.initial[static_cast<std::size_t>(y[to])] += s.r1[to];
      for (std::size_t from = 0; from < y.size(); ++from) {
        double a = s.alpha(to, from);
        if (a != 0.0) c.transitions(static_cast<std::size_t>(y[from]), static_cast<std::size_t>(y[to])) += a;
      }
    }
  }
  return c;
}

namespace detail {

// Row with no outgoing mass: uniform over co-occurring states, else uniform.
inline void fallback_row(std::span<double> row, const std::vector<int>& neighbours) {
  if (neighbours.empty()) {
    std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
    return;
  }
  std::fill(row.begin(), row.end(), 0.0);
  for (int j : neighbours) row[static_cast<std::size_t>(j)] = 1.0 / static_cast<double>(neighbours.size());
}

inline bool normalize(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  if (!(s > 0.0)) return false;
  for (double& x : v) x /= s;
  return true;
}

}  // namespace detail

/// Maximizes sum_j c_j log p_j over the simplex with p_j >= floor. The
/// solution clamps the smallest entries at the floor and keeps the rest
/// proportional to their counts. `p` holds normalized counts on entry.
inline void apply_floor(std::span<double> p, double floor) {
  if (!(floor > 0.0)) return;
  const std::size_t n = p.size();
  if (floor * static_cast<double>(n) >= 1.0)
    throw std::invalid_argument("theta_min must be below 1/|S|");
  std::vector<char> clamped(n, 0);
  for (;;) {
    double free_mass = 0.0;
    std::size_t n_clamped = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (clamped[j]) ++n_clamped;
      else free_mass += p[j];
    }
    const double budget = 1.0 - floor * static_cast<double>(n_clamped);
    bool changed = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (clamped[j]) continue;
      double scaled = free_mass > 0.0 ? p[j] * budget / free_mass : 0.0;
      if (scaled < floor) {
        clamped[j] = 1;
        changed = true;
      }
    }
    if (!changed) {
      for (std::size_t j = 0; j < n; ++j)
        p[j] = clamped[j] ? floor : p[j] * budget / free_mass;
      return;
    }
  }
}

inline void apply_floor(MarkovModel& m) {
  if (!(m.theta_min > 0.0)) return;
  apply_floor(std::span<double>(m.pi), m.theta_min);
  for (std::size_t i = 0; i < m.A.rows(); ++i) apply_floor(m.A.row(i), m.theta_min);
}

struct MstepOptions {
  double theta_min = 0.0;
  /// When set, pi is held at this value instead of being re-estimated.
  std::optional<std::vector<double>> fixed_pi;
};

/// Normalizes expected counts into a model: the ML update.
inline MarkovModel model_from_counts(const ExpectedCounts& c,
                                     const std::vector<std::vector<int>>& neighbours,
                                     const MstepOptions& opt) {
  const std::size_t n = c.initial.size();
  MarkovModel m;
  m.theta_min = opt.theta_min;
  if (opt.fixed_pi) {
    m.pi = *opt.fixed_pi;
  } else {
    m.pi = c.initial;
    if (!detail::normalize(m.pi)) std::fill(m.pi.begin(), m.pi.end(), 1.0 / static_cast<double>(n));
  }
  m.A = c.transitions;
  for (std::size_t i = 0; i < n; ++i)
    if (!detail::normalize(m.A.row(i))) detail::fallback_row(m.A.row(i), neighbours[i]);
  apply_floor(m);
  return m;
}

inline MarkovModel ml_update(std::span<const SufficientStats> stats, std::span<const Observation> obs,
                             std::size_t num_states, const MstepOptions& opt = {}) {
  return model_from_counts(expected_counts(stats, obs, num_states), cooccurring_states(obs, num_states),
                           opt);
}

/// MAP update under Dirichlet priors: numerators (u_i - 1 + counts)_+ and
/// (v_ij - 1 + counts)_+. A row whose prior and data are both empty falls back
/// as in the ML update; a row clipped entirely to zero is an error.
inline MarkovModel map_from_counts(const ExpectedCounts& c, const DirichletPriors& priors,
                                   const std::vector<std::vector<int>>& neighbours,
                                   const MstepOptions& opt) {
  const std::size_t n = c.initial.size();
  if (priors.u.size() != n || priors.v.rows() != n || priors.v.cols() != n)
    throw std::invalid_argument("map_update: prior dimensions do not match the state space");
  auto clip_row = [](std::span<const double> prior, std::span<const double> counts, std::span<double> out) {
    bool any_nonzero = false;
    for (std::size_t j = 0; j < out.size(); ++j) {
      double raw = prior[j] - 1.0 + counts[j];
      any_nonzero |= raw != 0.0;
      out[j] = std::max(0.0, raw);
    }
    return any_nonzero;
  };

  MarkovModel m;
  m.theta_min = opt.theta_min;
  m.pi.assign(n, 0.0);
  if (opt.fixed_pi) {
    m.pi = *opt.fixed_pi;
  } else {
    bool informative = clip_row(priors.u, c.initial, m.pi);
    if (!detail::normalize(m.pi)) {
      if (informative) throw RowClippedError(-1);
      std::fill(m.pi.begin(), m.pi.end(), 1.0 / static_cast<double>(n));
    }
  }
  m.A = Matrix(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    bool informative = clip_row(priors.v.row(i), c.transitions.row(i), m.A.row(i));
    if (!detail::normalize(m.A.row(i))) {
      if (informative) throw RowClippedError(static_cast<int>(i));
      detail::fallback_row(m.A.row(i), neighbours[i]);
    }
  }
  apply_floor(m);
  return m;
}

inline MarkovModel map_update(std::span<const SufficientStats> stats, std::span<const Observation> obs,
                              std::size_t num_states, const DirichletPriors& priors,
                              const MstepOptions& opt = {}) {
  return map_from_counts(expected_counts(stats, obs, num_states), priors,
                         cooccurring_states(obs, num_states), opt);
}

/// Counting estimates from fully ordered paths.
inline MarkovModel ordered_ml_estimates(std::span<const std::vector<int>> paths, std::size_t num_states) {
  if (paths.empty()) throw std::invalid_argument("ordered_ml_estimates: no paths");
  ExpectedCounts c{std::vector<double>(num_states, 0.0), Matrix(num_states, num_states, 0.0)};
  std::vector<Observation> as_obs;
  as_obs.reserve(paths.size());
  for (const auto& z : paths) {
    if (z.empty()) throw std::invalid_argument("ordered_ml_estimates: empty path");
    c.initial[static_cast<std::size_t>(z[0])] += 1.0;
    for (std::size_t t = 1; t < z.size(); ++t)
      c.transitions(static_cast<std::size_t>(z[t - 1]), static_cast<std::size_t>(z[t])) += 1.0;
    as_obs.push_back({z, EndpointMode::Free});
  }
  return model_from_counts(c, cooccurring_states(as_obs, num_states), {});
}

/// Empirical source frequencies of known-endpoint observations.
inline std::vector<double> known_endpoint_pi(std::span<const Observation> obs, std::size_t num_states) {
  if (obs.empty()) throw std::invalid_argument("known_endpoint_pi: no observations");
  std::vector<double> pi(num_states, 0.0);
  for (const auto& o : obs) {
    if (!o.known_endpoints()) throw std::invalid_argument("known_endpoint_pi: observation without known endpoints");
    pi[static_cast<std::size_t>(o.positions.front())] += 1.0;
  }
  for (double& p : pi) p /= static_cast<double>(obs.size());
  return pi;
}

/// Expected complete-data log-likelihood sum r log pi + sum alpha log A, with
/// 0 * log 0 = 0. Impossible terms give kImpossibleLogProb.
inline double q_value(const MarkovModel& m, const ExpectedCounts& c) {
  double q = 0.0;
  const std::size_t n = c.initial.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (c.initial[i] == 0.0) continue;
    if (!(m.pi[i] > 0.0)) return kImpossibleLogProb;
    q += c.initial[i] * std::log(m.pi[i]);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double w = c.transitions(i, j);
      if (w == 0.0) continue;
      if (!(m.A(i, j) > 0.0)) return kImpossibleLogProb;
      q += w * std::log(m.A(i, j));
    }
  return q;
}

}  // namespace nico
