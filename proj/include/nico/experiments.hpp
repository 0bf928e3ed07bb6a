#pragma once

// Experiment drivers shared by the CLI presets and the acceptance suite.

#include <cstdint>
#include <string>
#include <vector>

#include "nico/em.hpp"
#include "nico/evalmetrics.hpp"
#include "nico/fm.hpp"
#include "nico/reconstruct.hpp"
#include "nico/sampler.hpp"
#include "nico/simgen.hpp"

namespace nico::experiments {

// ---- sampler accuracy on a length-8 path with known endpoints ----

struct Fig1Config {
  std::size_t length = 8;
  double peak = 20.0;  // weight of the true next hop relative to any other
  std::size_t trials = 50;
  std::vector<std::size_t> sample_sizes{10, 50, 100, 200, 500};
  std::uint64_t seed = 1;
};

struct Fig1Row {
  std::string scheme;  // causal, uniform, true
  std::size_t samples = 0;
  double mean_l1 = 0.0;
};

/// Chain 0 -> 1 -> ... -> n-1 where the true successor is `peak` times as
/// likely as any other state.
inline MarkovModel peaked_chain(std::size_t n, double peak) {
  MarkovModel m;
  m.pi.assign(n, 1.0 / static_cast<double>(n));
  m.A = Matrix(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      m.A(i, j) = j == i + 1 ? peak : 1.0;
      sum += m.A(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) m.A(i, j) /= sum;
  }
  return m;
}

inline std::vector<Fig1Row> fig1(const Fig1Config& cfg) {
  const auto model = peaked_chain(cfg.length, cfg.peak);
  Observation obs;
  obs.mode = EndpointMode::KnownEndpoints;
  for (std::size_t i = 0; i < cfg.length; ++i) obs.positions.push_back(static_cast<int>(i));
  const auto exact = exact_perm_posterior(model, obs);
  std::vector<Permutation> perms;
  std::vector<double> probs;
  for (const auto& [p, q] : exact) {
    perms.push_back(p);
    probs.push_back(q);
  }

  std::vector<Fig1Row> rows;
  for (std::size_t L : cfg.sample_sizes) {
    double sum_causal = 0.0, sum_uniform = 0.0, sum_true = 0.0;
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      Rng rc(derive_seed(cfg.seed, {L, trial, 0}));
      Rng ru(derive_seed(cfg.seed, {L, trial, 1}));
      Rng rt(derive_seed(cfg.seed, {L, trial, 2}));
      auto causal = draw_samples(model, obs, L, Scheme::Causal, rc);
      auto uniform = draw_samples(model, obs, L, Scheme::Uniform, ru);
      std::vector<PermutationSample> truth(L);
      for (auto& s : truth) {
        s.perm = perms[rt.categorical(probs, 1.0)];
        s.log_weight = 0.0;
      }
      sum_causal += l1_distance(exact, empirical_perm_dist(causal));
      sum_uniform += l1_distance(exact, empirical_perm_dist(uniform));
      sum_true += l1_distance(exact, empirical_perm_dist(truth));
    }
    const double t = static_cast<double>(cfg.trials);
    rows.push_back({"causal", L, sum_causal / t});
    rows.push_back({"uniform", L, sum_uniform / t});
    rows.push_back({"true", L, sum_true / t});
  }
  return rows;
}

// ---- Monte Carlo EM versus exact EM from a common start ----

struct Fig3Config {
  std::size_t vertices = 140;
  std::size_t observations = 40;
  std::size_t min_len = 4;
  std::size_t max_len = 8;
  int iterations = 30;
  double theta_min = 1e-8;
  std::vector<std::size_t> sample_sizes{10, 1000};
  std::uint64_t seed = 1;
};

struct Fig3Data {
  StateSpace states;
  std::vector<std::vector<int>> paths;
  std::vector<Observation> observations;
};

/// Self-avoiding random walks on a random geometric graph, shuffled freely.
inline Fig3Data fig3_data(const Fig3Config& cfg) {
  Rng rng(derive_seed(cfg.seed, {0xF163}));
  auto rgg = random_geometric_graph(cfg.vertices, default_radius(cfg.vertices), rng);
  const std::size_t n = cfg.vertices;
  MarkovModel walk;
  walk.pi.assign(n, 1.0 / static_cast<double>(n));
  walk.A = Matrix(n, n, 0.0);
  auto adj = rgg.graph.adjacency();
  for (std::size_t i = 0; i < n; ++i) {
    if (adj[i].empty()) {
      walk.A(i, i) = 1.0;
      continue;
    }
    for (int j : adj[i]) walk.A(i, static_cast<std::size_t>(j)) = 1.0 / static_cast<double>(adj[i].size());
  }
  // Every vertex in a connected geometric graph of this density has a long
  // enough simple path; walks that get stuck are restarted by markov_paths.
  Fig3Data d;
  d.states = rgg.graph.vertices;
  d.paths = markov_paths(
      walk, cfg.observations,
      [&](Rng& r) { return cfg.min_len + static_cast<std::size_t>(r.below(cfg.max_len - cfg.min_len + 1)); }, rng);
  d.observations = shuffle_paths(d.paths, EndpointMode::Free, rng).observations;
  return d;
}

struct Fig3Result {
  EmRun exact;
  std::vector<EmRun> sampled;  // one per sample size
};

inline EmConfig fig3_em_config(const Fig3Config& cfg) {
  EmConfig em;
  em.max_iters = cfg.iterations;
  em.tol = 1e-15;
  em.consecutive_hits = 1000;
  em.theta_min = cfg.theta_min;
  em.master_seed = cfg.seed;
  em.restarts = 1;
  return em;
}

inline Fig3Result fig3(const Fig3Config& cfg) {
  const auto data = fig3_data(cfg);
  const std::size_t n = data.states.size();
  EmConfig em = fig3_em_config(cfg);
  em.exact_cap = static_cast<int>(cfg.max_len);
  const auto start = init_for_restart(data.observations, n, em, 0);
  Fig3Result out;
  out.exact = run_em_from(start, data.observations, n, em);
  for (std::size_t L : cfg.sample_sizes) {
    EmConfig mc = em;
    mc.exact_cap = 0;
    mc.trace_exact_cap = static_cast<int>(cfg.max_len);
    mc.samples = L;
    out.sampled.push_back(run_em_from(start, data.observations, n, mc));
  }
  return out;
}

// ---- reconstruction error, NICO versus the frequency method ----

struct Fig4Config {
  std::size_t nodes = 50;
  std::size_t sources = 5;
  std::size_t destinations = 20;
  bool random_routing = false;
  int restarts = 10;
  int exact_cap = kDefaultEnumerationCap;
  std::size_t samples = 2000;
  int max_iters = 200;
  double tol = 1e-6;
  int hits = 3;
  double theta_min = 1e-12;
  std::uint64_t seed = 1;
};

struct SimulatedNetwork {
  GeometricGraph rgg;
  std::vector<std::vector<int>> paths;
  ShuffledData shuffled;  // known endpoints
  std::vector<Observation> free_observations;
};

/// Random sources and destinations on a geometric graph, one route per pair.
inline SimulatedNetwork simulate_network(std::size_t nodes, std::size_t sources, std::size_t destinations,
                                         bool random_routing, std::uint64_t seed) {
  if (sources + destinations > nodes)
    throw std::invalid_argument("simulate: sources + destinations exceeds the number of nodes");
  Rng rng(seed);
  SimulatedNetwork net;
  net.rgg = random_geometric_graph(nodes, default_radius(nodes), rng);
  std::vector<int> order(nodes);
  for (std::size_t i = 0; i < nodes; ++i) order[i] = static_cast<int>(i);
  rng.shuffle(std::span<int>(order));
  Rng route_rng = rng.split({0x7077E});
  for (std::size_t a = 0; a < sources; ++a)
    for (std::size_t b = 0; b < destinations; ++b) {
      int s = order[a];
      int d = order[sources + b];
      try {
        net.paths.push_back(random_routing ? random_route(net.rgg.graph, s, d, route_rng)
                                           : shortest_path_route(net.rgg.graph, s, d));
      } catch (const Unreachable&) {
        // Pairs in different components produce no observation.
      }
    }
  Rng shuffle_rng = rng.split({0x5F1E});
  net.shuffled = shuffle_paths(net.paths, EndpointMode::KnownEndpoints, shuffle_rng);
  Rng free_rng = rng.split({0xF8EE});
  net.free_observations = shuffle_paths(net.paths, EndpointMode::Free, free_rng).observations;
  return net;
}

struct NicoRun {
  DirectedGraph graph;
  std::vector<Permutation> orders;
  double loglik = kNegInf;
  std::size_t error = 0;
};

/// Decodes every observation with a fitted model and builds the graph.
inline NicoRun decode_graph(const MarkovModel& m, std::span<const Observation> obs, const StateSpace& states,
                            const DecodeOptions& opt, std::uint64_t seed) {
  NicoRun run;
  run.orders.resize(obs.size());
  parallel_for(obs.size(), [&](std::size_t i) {
    Rng rng(derive_seed(seed, {0xDEC0DE, i}));
    run.orders[i] = most_likely_order(m, obs[i], opt, rng).perm;
  });
  std::vector<std::vector<int>> paths;
  for (std::size_t i = 0; i < obs.size(); ++i) paths.push_back(unshuffle(obs[i], run.orders[i]));
  run.graph = build_graph(paths, states);
  return run;
}

struct Fig4Topology {
  std::size_t observations = 0;
  std::size_t reference_edges = 0;
  std::vector<RunRecord> nico;
  std::vector<RunRecord> fm;
  RunSummary nico_summary;
  RunSummary fm_summary;

  std::size_t nico_pick_error() const { return nico[nico_summary.max_loglik].error; }
  std::size_t fm_clairvoyant_error() const { return fm[fm_summary.clairvoyant].error; }
  std::size_t fm_sparsest_error() const { return fm[fm_summary.sparsest].error; }
};

inline Fig4Topology fig4_topology(const Fig4Config& cfg, std::size_t topology) {
  const std::uint64_t seed = derive_seed(cfg.seed, {topology});
  auto net = simulate_network(cfg.nodes, cfg.sources, cfg.destinations, cfg.random_routing, seed);
  const auto& states = net.rgg.graph.vertices;
  const auto& obs = net.shuffled.observations;
  const auto ref = reference_graph_from_ordered(net.paths, states);

  Fig4Topology out;
  out.observations = obs.size();
  out.reference_edges = ref.num_edges();

  EmConfig em;
  em.max_iters = cfg.max_iters;
  em.tol = cfg.tol;
  em.consecutive_hits = cfg.hits;
  em.exact_cap = cfg.exact_cap;
  em.samples = cfg.samples;
  em.restarts = cfg.restarts;
  em.theta_min = cfg.theta_min;
  em.master_seed = seed;
  auto fits = run_restarts(obs, states.size(), em);
  DecodeOptions dec{cfg.exact_cap, cfg.samples, Scheme::Causal};
  for (std::size_t r = 0; r < fits.runs.size(); ++r) {
    auto run = decode_graph(fits.runs[r].model, obs, states, dec, derive_seed(seed, {r}));
    out.nico.push_back({run.graph.num_edges(), edge_symmetric_difference(run.graph, ref).total,
                        fits.ranking_loglik[r]});
  }
  for (int r = 0; r < cfg.restarts; ++r) {
    auto fm = fm_reconstruct(obs, states, derive_seed(seed, {0xF00, static_cast<std::uint64_t>(r)}));
    out.fm.push_back({fm.graph.num_edges(), edge_symmetric_difference(fm.graph, ref).total, 0.0});
  }
  out.nico_summary = summarize_runs(out.nico);
  out.fm_summary = summarize_runs(out.fm);
  return out;
}

}  // namespace nico::experiments
