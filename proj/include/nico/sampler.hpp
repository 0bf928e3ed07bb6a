#pragma once

// Monte Carlo E-step: sequential ("causal") and uniform importance samplers
// over orderings, self-normalized statistics, and sample-size bounds.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nico/exact_estep.hpp"
#include "nico/model.hpp"
#include "nico/rng.hpp"

namespace nico {

enum class Scheme { Causal, Uniform };

inline const char* to_string(Scheme s) { return s == Scheme::Causal ? "causal" : "uniform"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "causal") return Scheme::Causal;
  if (s == "uniform") return Scheme::Uniform;
  throw std::invalid_argument("unknown sampling scheme: " + s);
}

/// One sampled ordering and its importance weight.
///
/// `log_weight` is the log of the self-normalization weight z. For the causal
/// proposal in Free mode it is the product of the restricted normalizers from
/// the second step on; in KnownEndpoints mode it also carries the source prior
/// and the final forced transition. `log_ratio` is log(P'/R) with the fully
/// normalized proposal R, so that its mean over samples estimates the sum of
/// P[y|tau] over admissible orderings.
struct PermutationSample {
  Permutation perm;
  double log_weight = kNegInf;
  double log_ratio = kNegInf;
  double log_target_unnorm = kNegInf;
  bool dead_end = false;

  double weight() const { return std::exp(log_weight); }
};

namespace detail {

inline void fill_remaining(Permutation& p, std::size_t filled, const std::vector<char>& used) {
  for (std::size_t t = 0; t < used.size(); ++t)
    if (!used[t]) p.tau[filled++] = static_cast<int>(t);
}

}  // namespace detail

/// Sequential proposal: draw the first position from pi restricted to the
/// observation, then each next position from the current state's transition
/// row restricted to unused positions. Under KnownEndpoints the source is
/// pinned first, the destination is reserved for the last step, and the
/// interior is grown from the source's row.
inline PermutationSample draw_causal_sample(const MarkovModel& m, const Observation& obs, Rng& rng) {
  const std::size_t n = obs.size();
  const auto& y = obs.positions;
  PermutationSample s;
  s.perm.tau.assign(n, 0);
  std::vector<char> used(n, 0);
  std::vector<double> w(n, 0.0);
  auto state = [&](std::size_t t) { return static_cast<std::size_t>(y[t]); };

  double log_weight = 0.0;
  double log_first_norm = 0.0;
  std::size_t prev;
  std::size_t step;
  std::size_t last_free_step;  // exclusive bound of sampled steps

  const bool known = obs.known_endpoints() && n >= 2;
  if (known) {
    s.perm.tau[0] = 0;
    used[0] = 1;
    prev = 0;
    step = 1;
    last_free_step = n - 1;
    used[n - 1] = 1;  // reserved for the final step
    log_weight += safe_log(m.pi[state(0)]);
  } else {
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) total += (w[t] = m.pi[state(t)]);
    std::size_t pick = rng.categorical(w, total);
    if (pick >= n) {
      s.dead_end = true;
      detail::fill_remaining(s.perm, 0, used);
      s.log_target_unnorm = path_log_prob(m, unshuffle(obs, s.perm));
      return s;
    }
    log_first_norm = std::log(total);
    s.perm.tau[0] = static_cast<int>(pick);
    used[pick] = 1;
    prev = pick;
    step = 1;
    last_free_step = n;
  }

  for (; step < last_free_step; ++step) {
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) total += (w[t] = used[t] ? 0.0 : m.A(state(prev), state(t)));
    std::size_t pick = rng.categorical(w, total);
    if (pick >= n) {
      s.dead_end = true;
      if (known) used[n - 1] = 0;
      detail::fill_remaining(s.perm, step, used);
      s.log_target_unnorm = path_log_prob(m, unshuffle(obs, s.perm));
      return s;
    }
    log_weight += std::log(total);
    s.perm.tau[step] = static_cast<int>(pick);
    used[pick] = 1;
    prev = pick;
  }
  if (known) {
    s.perm.tau[n - 1] = static_cast<int>(n - 1);
    log_weight += safe_log(m.A(state(prev), state(n - 1)));
  }

  s.log_target_unnorm = path_log_prob(m, unshuffle(obs, s.perm));
  if (s.log_target_unnorm == kNegInf) log_weight = kNegInf;
  s.log_weight = log_weight;
  s.log_ratio = log_weight == kNegInf ? kNegInf : log_weight + log_first_norm;
  return s;
}

/// Uniform proposal over admissible orderings; the weight is the
/// unnormalized target itself.
inline PermutationSample draw_uniform_sample(const MarkovModel& m, const Observation& obs, Rng& rng) {
  const std::size_t n = obs.size();
  PermutationSample s;
  s.perm = Permutation::identity(n);
  if (obs.known_endpoints() && n > 2) {
    rng.shuffle(std::span<int>(s.perm.tau).subspan(1, n - 2));
  } else if (!obs.known_endpoints()) {
    rng.shuffle(std::span<int>(s.perm.tau));
  }
  s.log_target_unnorm = path_log_prob(m, unshuffle(obs, s.perm));
  s.log_weight = s.log_target_unnorm;
  s.log_ratio = s.log_target_unnorm == kNegInf
                    ? kNegInf
                    : s.log_target_unnorm + log_permutation_count(n, obs.mode);
  s.dead_end = false;
  return s;
}

inline PermutationSample draw_sample(Scheme scheme, const MarkovModel& m, const Observation& obs,
                                     Rng& rng) {
  return scheme == Scheme::Causal ? draw_causal_sample(m, obs, rng) : draw_uniform_sample(m, obs, rng);
}

/// Log-probability that the causal proposal generates `perm` (closed form).
inline double causal_proposal_log_prob(const MarkovModel& m, const Observation& obs,
                                       const Permutation& perm) {
  check_permutation(obs, perm);
  const std::size_t n = obs.size();
  const auto& y = obs.positions;
  auto state = [&](std::size_t t) { return static_cast<std::size_t>(y[t]); };
  std::vector<char> used(n, 0);
  double lp = 0.0;
  std::size_t begin = 1;
  std::size_t end = n;
  const bool known = obs.known_endpoints() && n >= 2;
  if (known) {
    used[0] = 1;
    used[n - 1] = 1;
    end = n - 1;
  } else {
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) total += m.pi[state(t)];
    std::size_t first = static_cast<std::size_t>(perm.tau[0]);
    lp += safe_log(m.pi[state(first)]) - safe_log(total);
    used[first] = 1;
  }
  for (std::size_t i = begin; i < end && lp != kNegInf; ++i) {
    std::size_t prev = static_cast<std::size_t>(perm.tau[i - 1]);
    std::size_t cur = static_cast<std::size_t>(perm.tau[i]);
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      if (!used[t]) total += m.A(state(prev), state(t));
    lp += safe_log(m.A(state(prev), state(cur))) - safe_log(total);
    used[cur] = 1;
  }
  return lp;
}

struct IsDiagnostics {
  std::size_t samples = 0;
  std::size_t zero_weight = 0;
  std::size_t dead_ends = 0;
  double ess = 0.0;           // (sum z)^2 / sum z^2
  double log_marginal = kNegInf;  // estimate of log P[y | A, pi]
};

struct IsResult {
  SufficientStats stats;
  IsDiagnostics diagnostics;
};

/// Self-normalized importance estimates from a given sample set. Zero-weight
/// samples stay in the denominator.
inline IsResult is_stats_from_samples(const Observation& obs,
                                      std::span<const PermutationSample> samples) {
  const std::size_t n = obs.size();
  if (samples.empty()) throw std::invalid_argument("is_stats: need at least one sample");
  IsResult out;
  out.stats = SufficientStats(n);
  auto& d = out.diagnostics;
  d.samples = samples.size();

  double max_lw = kNegInf;
  double max_lr = kNegInf;
  for (const auto& s : samples) {
    max_lw = std::max(max_lw, s.log_weight);
    max_lr = std::max(max_lr, s.log_ratio);
    if (s.log_weight == kNegInf) ++d.zero_weight;
    if (s.dead_end) ++d.dead_ends;
  }
  if (max_lw == kNegInf)
    throw UnsupportedObservation("all importance weights are zero for this observation");

  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& s : samples) {
    if (s.log_weight == kNegInf) continue;
    const double z = std::exp(s.log_weight - max_lw);
    sum += z;
    sum_sq += z * z;
    const auto& tau = s.perm.tau;
    out.stats.r1[static_cast<std::size_t>(tau[0])] += z;
    for (std::size_t t = 1; t < n; ++t)
      out.stats.alpha(static_cast<std::size_t>(tau[t]), static_cast<std::size_t>(tau[t - 1])) += z;
  }
  for (auto& v : out.stats.r1) v /= sum;
  for (auto& v : out.stats.alpha.data()) v /= sum;
  d.ess = sum * sum / sum_sq;

  double ratio_sum = 0.0;
  if (max_lr != kNegInf)
    for (const auto& s : samples) ratio_sum += std::exp(s.log_ratio - max_lr);
  d.log_marginal = max_lr == kNegInf
                       ? kNegInf
                       : max_lr + std::log(ratio_sum / static_cast<double>(samples.size())) -
                             log_permutation_count(n, obs.mode);
  return out;
}

inline std::vector<PermutationSample> draw_samples(const MarkovModel& m, const Observation& obs,
                                                   std::size_t count, Scheme scheme, Rng& rng) {
  std::vector<PermutationSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw_sample(scheme, m, obs, rng));
  return out;
}

/// Importance-sampled E-step statistics from `count` fresh samples.
inline IsResult is_stats(const MarkovModel& m, const Observation& obs, std::size_t count,
                         Scheme scheme, Rng& rng) {
  if (count == 0) throw std::invalid_argument("is_stats: L must be >= 1");
  auto samples = draw_samples(m, obs, count, scheme, rng);
  return is_stats_from_samples(obs, samples);
}

using PermDistribution = std::map<Permutation, double>;

/// Weight-normalized empirical distribution over the sampled orderings.
inline PermDistribution empirical_perm_dist(std::span<const PermutationSample> samples) {
  double max_lw = kNegInf;
  for (const auto& s : samples) max_lw = std::max(max_lw, s.log_weight);
  if (max_lw == kNegInf) throw std::invalid_argument("empirical_perm_dist: all weights are zero");
  PermDistribution out;
  double sum = 0.0;
  for (const auto& s : samples) {
    if (s.log_weight == kNegInf) continue;
    double z = std::exp(s.log_weight - max_lw);
    out[s.perm] += z;
    sum += z;
  }
  for (auto& [_, p] : out) p /= sum;
  return out;
}

inline double l1_distance(const PermDistribution& p, const PermDistribution& q) {
  double d = 0.0;
  auto a = p.begin();
  auto b = q.begin();
  while (a != p.end() || b != q.end()) {
    if (b == q.end() || (a != p.end() && a->first < b->first)) {
      d += std::abs(a->second);
      ++a;
    } else if (a == p.end() || b->first < a->first) {
      d += std::abs(b->second);
      ++b;
    } else {
      d += std::abs(a->second - b->second);
      ++a;
      ++b;
    }
  }
  return d;
}

/// Exact posterior over admissible orderings, by enumeration.
inline PermDistribution exact_perm_posterior(const MarkovModel& m, const Observation& obs,
                                             int cap = kDefaultEnumerationCap) {
  std::vector<std::pair<Permutation, double>> lps;
  for_each_permutation(obs.size(), obs.mode, [&](const Permutation& p) {
    lps.emplace_back(p, path_log_prob(m, unshuffle(obs, p)));
  }, cap);
  double mx = kNegInf;
  for (auto& [_, lp] : lps) mx = std::max(mx, lp);
  if (mx == kNegInf) throw UnsupportedObservation("every ordering has zero probability");
  double sum = 0.0;
  for (auto& [_, lp] : lps) sum += std::exp(lp - mx);
  PermDistribution out;
  for (auto& [p, lp] : lps) {
    double v = std::exp(lp - mx) / sum;
    if (v > 0.0) out.emplace(p, v);
  }
  return out;
}

/// Largest ratio of posterior to causal proposal probability over all
/// orderings, with 0/0 = 0.
inline double compute_bm(const MarkovModel& m, const Observation& obs,
                         int cap = kDefaultEnumerationCap) {
  auto post = exact_perm_posterior(m, obs, cap);
  double b = 0.0;
  for (const auto& [perm, p] : post) {
    double lr = causal_proposal_log_prob(m, obs, perm);
    if (lr == kNegInf) continue;  // P > 0 implies R > 0
    b = std::max(b, p / std::exp(lr));
  }
  return b;
}

/// Inputs for the sample-size bounds. `N` and `b` are per observation.
struct BoundInputs {
  std::size_t T = 0;
  std::vector<double> N;
  std::vector<double> b;
  double theta_min = 0.0;
  std::optional<double> lambda;
  double delta = 0.05;
  double epsilon = 1.0;
  std::optional<double> delta_star;

  void validate() const {
    if (T == 0) throw std::invalid_argument("bounds: T must be >= 1");
    if (N.size() != T || b.size() != T)
      throw std::invalid_argument("bounds: N and b must have T entries");
    for (double v : b)
      if (!(v > 0.0)) throw std::invalid_argument("bounds: b_m must be > 0");
    for (double v : N)
      if (!(v >= 1.0)) throw std::invalid_argument("bounds: N_m must be >= 1");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("bounds: delta must be in (0,1]");
    if (!(epsilon > 0.0 && epsilon <= 1.0))
      throw std::invalid_argument("bounds: epsilon must be in (0,1]");
  }
};

/// Samples for observation m guaranteeing an (epsilon, delta) probably
/// approximately monotonic update, before rounding.
inline double pam_sample_size_raw(const BoundInputs& in, std::size_t m) {
  in.validate();
  if (!(in.theta_min > 0.0 && in.theta_min < 1.0))
    throw std::invalid_argument("bounds: theta_min must be in (0, 1/|S|)");
  const double T = static_cast<double>(in.T);
  const double n = in.N.at(m);
  const double b = in.b.at(m);
  const double log_theta = std::abs(std::log(in.theta_min));
  // 1 - (1 - delta)^(1/T), without cancellation for small delta.
  const double per_obs_delta = -std::expm1(std::log1p(-in.delta) / T);
  const double coeff = 2.0 * T * T * std::pow(n, 4) * b * b * log_theta * log_theta /
                       (in.epsilon * in.epsilon);
  return coeff * std::log(2.0 * n * n / per_obs_delta);
}

inline double pam_sample_size(const BoundInputs& in, std::size_t m) {
  return std::ceil(pam_sample_size_raw(in, m));
}

/// Samples for observation m guaranteeing a monotone update with probability
/// at least 1 - delta, before rounding. Empty when the bound is undefined
/// (missing lambda or Delta* <= 0).
inline std::optional<double> monotone_sample_size_raw(const BoundInputs& in, std::size_t m) {
  in.validate();
  if (!in.lambda || !in.delta_star) return std::nullopt;
  if (!(*in.lambda > 0.0)) throw std::invalid_argument("bounds: lambda must be > 0");
  const double ds = *in.delta_star;
  if (!(ds > 0.0)) return std::nullopt;
  const double sum_n = std::accumulate(in.N.begin(), in.N.end(), 0.0);
  double sum_n2 = 0.0;
  for (double v : in.N) sum_n2 += v * v;
  const double ratio = (2.0 * sum_n + ds) / ds;
  return 27.0 * in.b.at(m) / *in.lambda * ratio * ratio * std::log(4.0 * sum_n2 / in.delta);
}

inline std::optional<double> monotone_sample_size(const BoundInputs& in, std::size_t m) {
  auto raw = monotone_sample_size_raw(in, m);
  if (!raw) return std::nullopt;
  return std::ceil(*raw);
}

}  // namespace nico
