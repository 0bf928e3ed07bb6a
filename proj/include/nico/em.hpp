#pragma once

// EM and Monte Carlo EM over shuffled observations, with random restarts.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nico/exact_estep.hpp"
#include "nico/model.hpp"
#include "nico/mstep.hpp"
#include "nico/parallel.hpp"
#include "nico/rng.hpp"
#include "nico/sampler.hpp"

namespace nico {

struct EmConfig {
  int max_iters = 200;
  double tol = 1e-6;
  int consecutive_hits = 3;
  int exact_cap = kDefaultEnumerationCap;
  std::size_t samples = 2000;
  Scheme scheme = Scheme::Causal;
  int restarts = 10;
  std::uint64_t master_seed = 42;
  double theta_min = 1e-12;
  std::optional<DirichletPriors> priors;
  std::optional<EndpointMode> endpoint_override;
  // Observations up to this length get an exact log-likelihood in the trace
  // even when their E-step is sampled. Negative means exact_cap.
  int trace_exact_cap = -1;
  // Samples for the restart-ranking likelihood. Zero means 5 * samples.
  std::size_t ranking_samples = 0;
  // Samples at iteration k are samples + ramp_slope * k.
  std::size_t ramp_slope = 0;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (consecutive_hits < 1) throw std::invalid_argument("consecutive_hits must be >= 1");
    if (samples < 1) throw std::invalid_argument("samples must be >= 1");
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (theta_min < 0.0) throw std::invalid_argument("theta_min must be >= 0");
  }
  int effective_trace_cap() const { return trace_exact_cap < 0 ? exact_cap : trace_exact_cap; }
  std::size_t effective_ranking_samples() const { return ranking_samples ? ranking_samples : 5 * samples; }
  std::size_t samples_at(int iter) const { return samples + ramp_slope * static_cast<std::size_t>(iter); }
};

/// An E-step failure tagged with the offending observation.
class ObservationError : public UnsupportedObservation {
 public:
  ObservationError(std::size_t index, const std::string& what)
      : UnsupportedObservation("observation " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

struct EmTraceRow {
  int restart = 0;
  int iter = 0;
  double loglik = 0.0;
  double q_value = 0.0;
  double ess_min = std::numeric_limits<double>::quiet_NaN();  // NaN when nothing was sampled
  double seconds = 0.0;
  std::size_t zero_weight = 0;
  std::size_t dead_ends = 0;
};

struct EmTrace {
  std::vector<EmTraceRow> rows;
  std::size_t non_monotone = 0;  // iterations whose loglik fell below the previous one
  std::string stop_reason;
};

struct EmRun {
  MarkovModel model;
  EmTrace trace;
  double final_loglik = kNegInf;
};

namespace detail {

enum : std::uint64_t { kInitStream = 0xA11CE, kEStepStream = 0xE57E9, kRankStream = 0x5C0E };

inline std::vector<Observation> with_override(std::span<const Observation> obs,
                                              std::optional<EndpointMode> mode) {
  std::vector<Observation> out(obs.begin(), obs.end());
  if (mode)
    for (auto& o : out) o.mode = *mode;
  return out;
}

inline bool all_known(std::span<const Observation> obs) {
  for (const auto& o : obs)
    if (!o.known_endpoints()) return false;
  return !obs.empty();
}

inline std::size_t max_state(std::span<const Observation> obs) {
  std::size_t n = 0;
  for (const auto& o : obs)
    for (int s : o.positions) n = std::max(n, static_cast<std::size_t>(s) + 1);
  return n;
}

}  // namespace detail

/// Random starting point. pi is positive on observed states (or the empirical
/// source frequencies when every observation has known endpoints); row i of A
/// is a flat Dirichlet draw over the states co-occurring with i.
inline MarkovModel init_model(std::span<const Observation> obs, std::size_t num_states, double theta_min,
                              Rng& rng) {
  if (obs.empty()) throw std::invalid_argument("init_model: no observations");
  if (num_states < detail::max_state(obs)) throw std::invalid_argument("init_model: state index out of range");
  MarkovModel m;
  m.theta_min = theta_min;
  if (detail::all_known(obs)) {
    m.pi = known_endpoint_pi(obs, num_states);
  } else {
    m.pi.assign(num_states, 0.0);
    std::vector<char> seen(num_states, 0);
    for (const auto& o : obs)
      for (int s : o.positions) seen[static_cast<std::size_t>(s)] = 1;
    for (std::size_t i = 0; i < num_states; ++i)
      if (seen[i]) m.pi[i] = rng.exponential();
    detail::normalize(m.pi);
  }
  auto nbrs = cooccurring_states(obs, num_states);
  m.A = Matrix(num_states, num_states, 0.0);
  for (std::size_t i = 0; i < num_states; ++i) {
    if (nbrs[i].empty()) {
      detail::fallback_row(m.A.row(i), nbrs[i]);
      continue;
    }
    for (int j : nbrs[i]) m.A(i, static_cast<std::size_t>(j)) = rng.exponential();
    detail::normalize(m.A.row(i));
  }
  apply_floor(m);
  return m;
}

/// Per-observation E-step output.
struct EStepOutput {
  SufficientStats stats;
  double log_marginal = kNegInf;
  bool sampled = false;
  IsDiagnostics diagnostics;
};

inline EStepOutput estep_observation(const MarkovModel& m, const Observation& o, std::size_t index,
                                     const EmConfig& cfg, std::size_t samples, Rng rng) {
  EStepOutput out;
  try {
    if (static_cast<int>(o.size()) <= cfg.exact_cap) {
      auto r = exact_stats(m, o, cfg.exact_cap);
      out.stats = std::move(r.stats);
      out.log_marginal = r.log_marginal;
    } else {
      auto r = is_stats(m, o, samples, cfg.scheme, rng);
      out.stats = std::move(r.stats);
      out.diagnostics = r.diagnostics;
      out.log_marginal = r.diagnostics.log_marginal;
      out.sampled = true;
    }
  } catch (const UnsupportedObservation& e) {
    throw ObservationError(index, e.what());
  }
  return out;
}

/// log P[Y | A, pi] summed over observations: exact up to the enumeration cap,
/// importance-sampled beyond it with `samples` draws per observation.
inline double marginal_loglik(const MarkovModel& m, std::span<const Observation> obs, int exact_cap,
                              std::size_t samples, Scheme scheme, std::uint64_t seed) {
  std::vector<double> ll(obs.size(), 0.0);
  parallel_for(obs.size(), [&](std::size_t i) {
    const auto& o = obs[i];
    if (static_cast<int>(o.size()) <= exact_cap) {
      detail::OrderSearch search(m, o);
      const double ref = search.best().second;
      if (ref == kNegInf) {
        ll[i] = kImpossibleLogProb;
        return;
      }
      auto tot = search.accumulate(ref);
      ll[i] = ref + std::log(tot.total) - log_permutation_count(o.size(), o.mode);
    } else {
      Rng rng(derive_seed(seed, {detail::kRankStream, i}));
      auto draws = draw_samples(m, o, samples, scheme, rng);
      double mx = kNegInf;
      for (const auto& s : draws) mx = std::max(mx, s.log_ratio);
      if (mx == kNegInf) {
        ll[i] = kImpossibleLogProb;
        return;
      }
      double sum = 0.0;
      for (const auto& s : draws) sum += std::exp(s.log_ratio - mx);
      ll[i] = mx + std::log(sum / static_cast<double>(samples)) - log_permutation_count(o.size(), o.mode);
    }
  });
  double total = 0.0;
  for (double v : ll) {
    if (v <= kImpossibleLogProb) return kImpossibleLogProb;
    total += v;
  }
  return total;
}

inline double marginal_loglik(const MarkovModel& m, std::span<const Observation> obs, const EmConfig& cfg) {
  auto o = detail::with_override(obs, cfg.endpoint_override);
  return marginal_loglik(m, o, cfg.exact_cap, cfg.effective_ranking_samples(), cfg.scheme, cfg.master_seed);
}

/// EM from a given starting model. Row k of the trace holds the marginal
/// log-likelihood of the k-th iterate; an M-step follows unless the run stops.
inline EmRun run_em_from(MarkovModel model, std::span<const Observation> input, std::size_t num_states,
                         const EmConfig& cfg, int restart = 0) {
  cfg.validate();
  const auto obs = detail::with_override(input, cfg.endpoint_override);
  if (obs.empty()) throw std::invalid_argument("run_em: no observations");
  for (const auto& o : obs) check_observation(o, num_states);
  const auto nbrs = cooccurring_states(obs, num_states);
  MstepOptions mopt;
  mopt.theta_min = cfg.theta_min;
  if (detail::all_known(obs)) mopt.fixed_pi = model.pi;
  const int trace_cap = cfg.effective_trace_cap();
  const std::uint64_t run_seed = derive_seed(cfg.master_seed, {static_cast<std::uint64_t>(restart)});

  EmRun run;
  int hits = 0;
  for (int k = 0;; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t L = cfg.samples_at(k);
    std::vector<EStepOutput> es(obs.size());
    std::vector<double> trace_ll(obs.size(), 0.0);
    parallel_for(obs.size(), [&](std::size_t i) {
      Rng rng(derive_seed(run_seed, {detail::kEStepStream, i, static_cast<std::uint64_t>(k)}));
      es[i] = estep_observation(model, obs[i], i, cfg, L, rng);
      trace_ll[i] = es[i].log_marginal;
      if (es[i].sampled && static_cast<int>(obs[i].size()) <= trace_cap) {
        try {
          trace_ll[i] = exact_obs_loglik(model, obs[i], trace_cap);
        } catch (const UnsupportedObservation&) {
          trace_ll[i] = kImpossibleLogProb;
        }
      }
    });

    EmTraceRow row;
    row.restart = restart;
    row.iter = k;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      row.loglik += trace_ll[i];
      if (es[i].sampled) {
        const auto& d = es[i].diagnostics;
        row.ess_min = std::isnan(row.ess_min) ? d.ess : std::min(row.ess_min, d.ess);
        row.zero_weight += d.zero_weight;
        row.dead_ends += d.dead_ends;
      }
    }
    std::vector<SufficientStats> stats;
    stats.reserve(obs.size());
    for (auto& e : es) stats.push_back(std::move(e.stats));
    const auto counts = expected_counts(stats, obs, num_states);
    row.q_value = q_value(model, counts);

    if (!run.trace.rows.empty()) {
      const double prev = run.trace.rows.back().loglik;
      if (row.loglik < prev) ++run.trace.non_monotone;
      const double rel = std::abs(row.loglik - prev) / std::max(std::abs(row.loglik), 1e-300);
      hits = rel < cfg.tol ? hits + 1 : 0;
    }
    const bool converged = hits >= cfg.consecutive_hits;
    const bool exhausted = k >= cfg.max_iters;
    if (!converged && !exhausted) {
      model = cfg.priors ? map_from_counts(counts, *cfg.priors, nbrs, mopt) : model_from_counts(counts, nbrs, mopt);
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.trace.rows.push_back(row);
    if (converged || exhausted) {
      run.trace.stop_reason = converged ? "converged" : "max_iters";
      break;
    }
  }
  run.model = std::move(model);
  run.final_loglik = run.trace.rows.back().loglik;
  return run;
}

inline MarkovModel init_for_restart(std::span<const Observation> input, std::size_t num_states,
                                    const EmConfig& cfg, int restart) {
  const auto obs = detail::with_override(input, cfg.endpoint_override);
  Rng rng(derive_seed(cfg.master_seed, {static_cast<std::uint64_t>(restart), detail::kInitStream}));
  return init_model(obs, num_states, cfg.theta_min, rng);
}

inline EmRun run_em(std::span<const Observation> obs, std::size_t num_states, const EmConfig& cfg,
                    int restart = 0) {
  return run_em_from(init_for_restart(obs, num_states, cfg, restart), obs, num_states, cfg, restart);
}

struct RestartResult {
  std::vector<EmRun> runs;
  std::vector<double> ranking_loglik;
  std::size_t best = 0;

  const EmRun& best_run() const { return runs[best]; }
};

/// Runs cfg.restarts independent fits and ranks their final models by
/// marginal log-likelihood (ties go to the lowest restart index).
inline RestartResult run_restarts(std::span<const Observation> obs, std::size_t num_states, const EmConfig& cfg) {
  cfg.validate();
  RestartResult out;
  for (int r = 0; r < cfg.restarts; ++r) {
    out.runs.push_back(run_em(obs, num_states, cfg, r));
    out.ranking_loglik.push_back(marginal_loglik(out.runs.back().model, obs, cfg));
    if (out.ranking_loglik.back() > out.ranking_loglik[out.best]) out.best = out.runs.size() - 1;
  }
  return out;
}

}  // namespace nico
