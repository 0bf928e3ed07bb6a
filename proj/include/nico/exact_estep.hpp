#pragma once

// Exact E-step by enumerating every ordering of an observation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nico/model.hpp"

namespace nico {

inline constexpr int kDefaultEnumerationCap = 12;

class EnumerationCapExceeded : public std::runtime_error {
 public:
  EnumerationCapExceeded(std::size_t n, int cap)
      : std::runtime_error("observation length " + std::to_string(n) +
                           " exceeds enumeration cap " + std::to_string(cap)) {}
};

/// Thrown when no ordering of an observation has positive probability.
class UnsupportedObservation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Calls fn(perm) for every ordering of N positions, in lexicographic order.
/// KnownEndpoints pins tau[0] = 0 and tau[N-1] = N-1.
template <class Fn>
void for_each_permutation(std::size_t n, EndpointMode mode, Fn&& fn,
                          int cap = kDefaultEnumerationCap) {
  if (n == 0) throw std::invalid_argument("for_each_permutation: N must be >= 1");
  if (static_cast<int>(n) > cap) throw EnumerationCapExceeded(n, cap);
  Permutation p = Permutation::identity(n);
  if (mode == EndpointMode::KnownEndpoints && n >= 2) {
    do {
      fn(std::as_const(p));
    } while (std::next_permutation(p.tau.begin() + 1, p.tau.end() - 1));
  } else {
    do {
      fn(std::as_const(p));
    } while (std::next_permutation(p.tau.begin(), p.tau.end()));
  }
}

inline std::vector<Permutation> enumerate_permutations(std::size_t n, EndpointMode mode,
                                                       int cap = kDefaultEnumerationCap) {
  std::vector<Permutation> out;
  for_each_permutation(n, mode, [&](const Permutation& p) { out.push_back(p); }, cap);
  return out;
}

namespace detail {

// Depth-first walk over orderings that share prefix computations. Positions
// are tried in increasing index order, so leaves arrive in lexicographic
// order of tau. Prefix log-probabilities never increase along a branch, which
// both search routines below exploit for pruning.
class OrderSearch {
 public:
  OrderSearch(const MarkovModel& m, const Observation& obs)
      : m_(m), y_(obs.positions), n_(obs.size()), known_(obs.known_endpoints() && n_ >= 2) {
    log_pi_.resize(n_);
    log_a_.assign(n_ * n_, kNegInf);
    for (std::size_t t = 0; t < n_; ++t) {
      log_pi_[t] = safe_log(m.pi[static_cast<std::size_t>(y_[t])]);
      for (std::size_t u = 0; u < n_; ++u)
        if (u != t)
          log_a_[t * n_ + u] =
              safe_log(m.A(static_cast<std::size_t>(y_[t]), static_cast<std::size_t>(y_[u])));
    }
    used_.assign(n_, 0);
    tau_.assign(n_, 0);
  }

  double log_a(std::size_t from, std::size_t to) const { return log_a_[from * n_ + to]; }

  /// Highest-probability ordering; ties go to the lexicographically first.
  /// Returns -inf log-probability when every ordering is impossible.
  std::pair<Permutation, double> best() {
    best_lp_ = kNegInf;
    best_tau_.clear();
    if (n_ == 1) return {Permutation::identity(1), log_pi_[0]};
    if (known_) {
      if (log_pi_[0] != kNegInf) {
        mark(0, 0);
        best_rec(1, log_pi_[0]);
        unmark(0);
      }
    } else {
      for (std::size_t t = 0; t < n_; ++t) {
        if (log_pi_[t] == kNegInf || (has_best() && log_pi_[t] <= best_lp_)) continue;
        mark(0, t);
        best_rec(1, log_pi_[t]);
        unmark(t);
      }
    }
    Permutation p;
    if (has_best()) p.tau = best_tau_;
    else p = Permutation::identity(n_);
    return {p, best_lp_};
  }

  struct Totals {
    double ref = kNegInf;  // all weights are exp(logp - ref)
    double total = 0.0;
    std::vector<double> r1;
    Matrix alpha;  // (to, from)
  };

  /// Sums exp(logp - ref) over orderings, split into first-position and
  /// transition totals. Orderings below ref by more than the double range are
  /// skipped; they would contribute exactly zero.
  Totals accumulate(double ref) {
    Totals tot;
    tot.ref = ref;
    tot.r1.assign(n_, 0.0);
    tot.alpha = Matrix(n_, n_, 0.0);
    tot_ = &tot;
    if (n_ == 1) {
      tot.total = std::exp(log_pi_[0] - ref);
      tot.r1[0] = tot.total;
    } else if (known_) {
      if (log_pi_[0] != kNegInf) {
        mark(0, 0);
        double w = sum_rec(1, log_pi_[0]);
        unmark(0);
        tot.r1[0] = w;
        tot.total = w;
      }
    } else {
      for (std::size_t t = 0; t < n_; ++t) {
        if (log_pi_[t] == kNegInf) continue;
        mark(0, t);
        double w = sum_rec(1, log_pi_[t]);
        unmark(t);
        tot.r1[t] += w;
        tot.total += w;
      }
    }
    tot_ = nullptr;
    return tot;
  }

 private:
  static constexpr double kUnderflowGap = -760.0;

  bool has_best() const { return !best_tau_.empty(); }
  void mark(std::size_t depth, std::size_t pos) {
    tau_[depth] = static_cast<int>(pos);
    used_[pos] = 1;
  }
  void unmark(std::size_t pos) { used_[pos] = 0; }

  // Candidate positions for the ordering step `depth`.
  bool candidate(std::size_t depth, std::size_t pos) const {
    if (used_[pos]) return false;
    if (!known_) return true;
    const bool last_step = depth == n_ - 1;
    return last_step ? pos == n_ - 1 : pos != n_ - 1;
  }

  void best_rec(std::size_t depth, double lp) {
    if (depth == n_) {
      if (!has_best() || lp > best_lp_) {
        best_lp_ = lp;
        best_tau_ = tau_;
      }
      return;
    }
    const std::size_t prev = static_cast<std::size_t>(tau_[depth - 1]);
    for (std::size_t pos = 0; pos < n_; ++pos) {
      if (!candidate(depth, pos)) continue;
      double next = lp + log_a(prev, pos);
      if (next == kNegInf) continue;
      // Completions can only lower the score and would lose a tie.
      if (has_best() && next <= best_lp_) continue;
      mark(depth, pos);
      best_rec(depth + 1, next);
      unmark(pos);
    }
  }

  // Returns the summed weight of all completions of the current prefix and
  // credits each transition with the weight of the subtree below it.
  double sum_rec(std::size_t depth, double lp) {
    if (depth == n_) return std::exp(lp - tot_->ref);
    const std::size_t prev = static_cast<std::size_t>(tau_[depth - 1]);
    double sum = 0.0;
    for (std::size_t pos = 0; pos < n_; ++pos) {
      if (!candidate(depth, pos)) continue;
      double next = lp + log_a(prev, pos);
      if (next == kNegInf || next - tot_->ref < kUnderflowGap) continue;
      mark(depth, pos);
      double w = sum_rec(depth + 1, next);
      unmark(pos);
      tot_->alpha(pos, prev) += w;
      sum += w;
    }
    return sum;
  }

  const MarkovModel& m_;
  const std::vector<int>& y_;
  std::size_t n_;
  bool known_;
  std::vector<double> log_pi_;
  std::vector<double> log_a_;
  std::vector<char> used_;
  std::vector<int> tau_;
  double best_lp_ = kNegInf;
  std::vector<int> best_tau_;
  Totals* tot_ = nullptr;
};

}  // namespace detail

struct ExactResult {
  SufficientStats stats;
  double log_marginal = kNegInf;
};

/// Posterior first-position and transition statistics for one observation,
/// plus log P[y | A, pi] (the ordering sum divided by the number of
/// admissible orderings).
inline ExactResult exact_stats(const MarkovModel& m, const Observation& obs,
                               int cap = kDefaultEnumerationCap) {
  const std::size_t n = obs.size();
  if (n == 0) throw std::invalid_argument("exact_stats: empty observation");
  if (static_cast<int>(n) > cap) throw EnumerationCapExceeded(n, cap);
  detail::OrderSearch search(m, obs);
  const double ref = search.best().second;
  if (ref == kNegInf)
    throw UnsupportedObservation("every ordering of the observation has zero probability");
  auto tot = search.accumulate(ref);

  ExactResult out;
  out.stats = SufficientStats(n);
  for (std::size_t t = 0; t < n; ++t) out.stats.r1[t] = tot.r1[t] / tot.total;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) out.stats.alpha(a, b) = tot.alpha(a, b) / tot.total;
  out.log_marginal = ref + std::log(tot.total) - log_permutation_count(n, obs.mode);
  return out;
}

inline double exact_obs_loglik(const MarkovModel& m, const Observation& obs,
                               int cap = kDefaultEnumerationCap) {
  return exact_stats(m, obs, cap).log_marginal;
}

/// Most probable ordering by exhaustive branch-and-bound search.
inline std::pair<Permutation, double> exact_best_order(const MarkovModel& m, const Observation& obs,
                                                       int cap = kDefaultEnumerationCap) {
  if (static_cast<int>(obs.size()) > cap) throw EnumerationCapExceeded(obs.size(), cap);
  detail::OrderSearch search(m, obs);
  return search.best();
}

}  // namespace nico
