#pragma once

// Core domain types for shuffled-path Markov chain inference: state labels,
// the chain parameters, unordered observations and the permutations that
// order them.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace nico {

/// Log-probability reported for a path that the model cannot generate.
/// Finite so that comparisons and argmax stay total.
inline constexpr double kImpossibleLogProb = -1e300;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(x) with log(0) = -inf (no FE_DIVBYZERO surprises in callers).
inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Bijection between opaque vertex labels and dense indices [0, size()).
class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<std::string> labels) {
    for (auto& l : labels) add(std::move(l));
  }

  /// Index of `label`, inserting it if new.
  int add(std::string label) {
    auto it = index_.find(label);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(labels_.size());
    index_.emplace(label, id);
    labels_.push_back(std::move(label));
    return id;
  }

  /// Index of `label` or -1.
  int find(const std::string& label) const {
    auto it = index_.find(label);
    return it == index_.end() ? -1 : it->second;
  }

  int at(const std::string& label) const {
    int id = find(label);
    if (id < 0) throw std::out_of_range("unknown state label: " + label);
    return id;
  }

  const std::string& label(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  /// State space with labels "0", "1", ..., "n-1".
  static StateSpace numbered(std::size_t n) {
    StateSpace s;
    for (std::size_t i = 0; i < n; ++i) s.add(std::to_string(i));
    return s;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

/// Initial distribution `pi` and row-stochastic transition matrix `A`.
struct MarkovModel {
  std::vector<double> pi;
  Matrix A;
  double theta_min = 0.0;

  MarkovModel() = default;
  MarkovModel(std::vector<double> pi_, Matrix A_, double theta_min_ = 0.0)
      : pi(std::move(pi_)), A(std::move(A_)), theta_min(theta_min_) {}

  std::size_t num_states() const { return pi.size(); }

  /// Uniform initial distribution and uniform transition rows.
  static MarkovModel uniform(std::size_t n) {
    return {std::vector<double>(n, 1.0 / static_cast<double>(n)),
            Matrix(n, n, 1.0 / static_cast<double>(n))};
  }
};

enum class EndpointMode { Free, KnownEndpoints };

inline const char* to_string(EndpointMode m) {
  return m == EndpointMode::Free ? "free" : "known";
}

/// One unordered co-occurrence. `positions` holds state indices in recorded
/// order; under KnownEndpoints the first entry is the source and the last the
/// destination.
struct Observation {
  std::vector<int> positions;
  EndpointMode mode = EndpointMode::Free;

  std::size_t size() const { return positions.size(); }
  bool known_endpoints() const { return mode == EndpointMode::KnownEndpoints; }
};

/// Ordering of observation positions: the t-th visited state is
/// positions[tau[t]]. Indices are zero-based.
struct Permutation {
  std::vector<int> tau;

  std::size_t size() const { return tau.size(); }
  auto operator<=>(const Permutation&) const = default;

  static Permutation identity(std::size_t n) {
    Permutation p;
    p.tau.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.tau[i] = static_cast<int>(i);
    return p;
  }

  Permutation inverse() const {
    Permutation p;
    p.tau.resize(tau.size());
    for (std::size_t t = 0; t < tau.size(); ++t) p.tau[static_cast<std::size_t>(tau[t])] = static_cast<int>(t);
    return p;
  }
};

/// Posterior expectations for one observation. `alpha(to, from)` is the
/// expected number of transitions from position `from` to position `to`;
/// `r1[t]` is the probability that position t starts the path.
struct SufficientStats {
  std::vector<double> r1;
  Matrix alpha;

  SufficientStats() = default;
  explicit SufficientStats(std::size_t n) : r1(n, 0.0), alpha(n, n, 0.0) {}

  std::size_t size() const { return r1.size(); }
};

struct ModelViolation {
  enum class Kind { Dimension, PiSum, RowSum, Negative, BelowFloor, NonFinite };
  Kind kind;
  int row = -1;  // -1 for pi
  int col = -1;
  double residual = 0.0;
};

/// Checks normalization, non-negativity and the theta_min floor. Never throws.
inline std::vector<ModelViolation> validate_model(const MarkovModel& m, double tol = 1e-12) {
  using K = ModelViolation::Kind;
  std::vector<ModelViolation> out;
  const std::size_t n = m.pi.size();
  if (n == 0 || m.A.rows() != n || m.A.cols() != n) {
    out.push_back({K::Dimension, -1, -1, 0.0});
    return out;
  }
  const bool floored = m.theta_min > 0.0;
  const double floor_tol = m.theta_min * 1e-9;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p = m.pi[i];
    if (!std::isfinite(p)) out.push_back({K::NonFinite, -1, static_cast<int>(i), p});
    else if (p < 0.0) out.push_back({K::Negative, -1, static_cast<int>(i), p});
    else if (floored && p < m.theta_min - floor_tol)
      out.push_back({K::BelowFloor, -1, static_cast<int>(i), m.theta_min - p});
    s += p;
  }
  if (std::abs(s - 1.0) > tol) out.push_back({K::PiSum, -1, -1, s - 1.0});
  for (std::size_t i = 0; i < n; ++i) {
    double rs = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double a = m.A(i, j);
      if (!std::isfinite(a)) out.push_back({K::NonFinite, static_cast<int>(i), static_cast<int>(j), a});
      else if (a < 0.0) out.push_back({K::Negative, static_cast<int>(i), static_cast<int>(j), a});
      else if (floored && a < m.theta_min - floor_tol)
        out.push_back({K::BelowFloor, static_cast<int>(i), static_cast<int>(j), m.theta_min - a});
      rs += a;
    }
    if (std::abs(rs - 1.0) > tol) out.push_back({K::RowSum, static_cast<int>(i), -1, rs - 1.0});
  }
  return out;
}

inline bool is_bijection(std::span<const int> tau) {
  std::vector<char> seen(tau.size(), 0);
  for (int t : tau) {
    if (t < 0 || static_cast<std::size_t>(t) >= tau.size() || seen[static_cast<std::size_t>(t)]) return false;
    seen[static_cast<std::size_t>(t)] = 1;
  }
  return true;
}

/// Checks that `perm` is a valid ordering of `obs` in its endpoint mode.
inline void check_permutation(const Observation& obs, const Permutation& perm) {
  if (perm.size() != obs.size())
    throw std::invalid_argument("permutation length " + std::to_string(perm.size()) +
                                " does not match observation length " + std::to_string(obs.size()));
  if (!is_bijection(perm.tau)) throw std::invalid_argument("permutation is not a bijection");
  const std::size_t n = perm.size();
  if (obs.known_endpoints() && n >= 2 && (perm.tau[0] != 0 || perm.tau[n - 1] != static_cast<int>(n) - 1))
    throw std::invalid_argument("permutation moves a known endpoint");
}

/// Ordered state sequence z with z[t] = positions[tau[t]].
inline std::vector<int> unshuffle(const Observation& obs, const Permutation& perm) {
  check_permutation(obs, perm);
  std::vector<int> z(obs.size());
  for (std::size_t t = 0; t < z.size(); ++t) z[t] = obs.positions[static_cast<std::size_t>(perm.tau[t])];
  return z;
}

/// log(pi[z0] * prod A[z(t-1), z(t)]); -inf if impossible.
inline double path_log_prob(const MarkovModel& m, std::span<const int> z) {
  double lp = safe_log(m.pi[static_cast<std::size_t>(z[0])]);
  for (std::size_t t = 1; t < z.size() && lp != kNegInf; ++t)
    lp += safe_log(m.A(static_cast<std::size_t>(z[t - 1]), static_cast<std::size_t>(z[t])));
  return lp;
}

/// Log-probability of an ordered path. Impossible paths give kImpossibleLogProb.
inline double ordered_loglik(const MarkovModel& m, std::span<const int> z) {
  if (z.empty()) throw std::invalid_argument("ordered_loglik: empty path");
  for (int s : z)
    if (s < 0 || static_cast<std::size_t>(s) >= m.num_states())
      throw std::out_of_range("ordered_loglik: state index out of range");
  double lp = path_log_prob(m, z);
  return lp == kNegInf ? kImpossibleLogProb : lp;
}

/// Throws if the observation is empty, repeats a state or references a state
/// outside [0, num_states).
inline void check_observation(const Observation& obs, std::size_t num_states) {
  if (obs.positions.empty()) throw std::invalid_argument("observation has no vertices");
  std::vector<int> sorted = obs.positions;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 0 || static_cast<std::size_t>(sorted.back()) >= num_states)
    throw std::out_of_range("observation state index out of range");
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("observation repeats a vertex");
}

/// Number of orderings compatible with the mode: N! or (N-2)!.
inline double permutation_count(std::size_t n, EndpointMode mode) {
  std::size_t k = (mode == EndpointMode::KnownEndpoints && n >= 2) ? n - 2 : n;
  double c = 1.0;
  for (std::size_t i = 2; i <= k; ++i) c *= static_cast<double>(i);
  return c;
}

inline double log_permutation_count(std::size_t n, EndpointMode mode) {
  std::size_t k = (mode == EndpointMode::KnownEndpoints && n >= 2) ? n - 2 : n;
  return std::lgamma(static_cast<double>(k) + 1.0);
}

/// log(sum(exp(v))) with -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace nico
