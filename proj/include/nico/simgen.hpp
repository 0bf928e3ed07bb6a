#pragma once

// Synthetic topologies, routes and shuffled observations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nico/graph.hpp"
#include "nico/model.hpp"
#include "nico/rng.hpp"

namespace nico {

struct GeometricGraph {
  DirectedGraph graph;
  std::vector<std::pair<double, double>> coords;
  bool connected = false;
  int attempts = 0;
};

/// Zero-padded vertex labels so lexicographic order matches index order.
inline StateSpace padded_labels(std::size_t n, const std::string& prefix = "n") {
  const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  StateSpace s;
  for (std::size_t i = 0; i < n; ++i) {
    std::string num = std::to_string(i);
    s.add(prefix + std::string(width - num.size(), '0') + num);
  }
  return s;
}

inline bool strongly_connected(const DirectedGraph& g) {
  const std::size_t n = g.num_vertices();
  if (n == 0) return true;
  auto reach = [&](const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[static_cast<std::size_t>(v)])
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          ++count;
          stack.push_back(w);
        }
    }
    return count == n;
  };
  auto fwd = g.adjacency();
  std::vector<std::vector<int>> rev(n);
  for (auto [a, b] : g.edges) rev[static_cast<std::size_t>(b)].push_back(a);
  return reach(fwd) && reach(rev);
}

inline constexpr int kDefaultGeometricRetries = 100;

/// n points uniform in the unit square; points within `radius` are joined in
/// both directions. Disconnected draws are retried up to `max_attempts` times
/// and the last one is returned with connected = false.
inline GeometricGraph random_geometric_graph(std::size_t n, double radius, Rng& rng,
                                             int max_attempts = kDefaultGeometricRetries) {
  if (n < 2) throw std::invalid_argument("random_geometric_graph: n must be >= 2");
  if (radius < 0.0) throw std::invalid_argument("random_geometric_graph: radius must be >= 0");
  GeometricGraph out;
  for (int attempt = 1; attempt <= std::max(1, max_attempts); ++attempt) {
    out.attempts = attempt;
    out.graph = DirectedGraph(padded_labels(n));
    out.coords.clear();
    for (std::size_t i = 0; i < n; ++i) {
      double x = rng.uniform();
      double y = rng.uniform();
      out.coords.emplace_back(x, y);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double dx = out.coords[i].first - out.coords[j].first;
        double dy = out.coords[i].second - out.coords[j].second;
        if (std::sqrt(dx * dx + dy * dy) <= radius) {
          out.graph.add_edge(static_cast<int>(i), static_cast<int>(j));
          out.graph.add_edge(static_cast<int>(j), static_cast<int>(i));
        }
      }
    out.connected = strongly_connected(out.graph);
    if (out.connected) break;
  }
  return out;
}

/// The usual connectivity radius sqrt(log n / n).
inline double default_radius(std::size_t n) {
  return std::sqrt(std::log(static_cast<double>(n)) / static_cast<double>(n));
}

class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimum-hop path; among those, the lexicographically smallest label
/// sequence.
inline std::vector<int> shortest_path_route(const DirectedGraph& g, int s, int d) {
  const std::size_t n = g.num_vertices();
  auto adj = g.adjacency();
  std::vector<std::vector<int>> rev(n);
  for (auto [a, b] : g.edges) rev[static_cast<std::size_t>(b)].push_back(a);
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> dist(n, kInf);
  std::deque<int> q{d};
  dist[static_cast<std::size_t>(d)] = 0;
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    for (int w : rev[static_cast<std::size_t>(v)])
      if (dist[static_cast<std::size_t>(w)] == kInf) {
        dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
        q.push_back(w);
      }
  }
  if (dist[static_cast<std::size_t>(s)] == kInf)
    throw Unreachable("no route from " + g.vertices.label(s) + " to " + g.vertices.label(d));
  std::vector<int> path{s};
  for (int v = s; v != d;) {
    int next = -1;
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (dist[static_cast<std::size_t>(w)] != dist[static_cast<std::size_t>(v)] - 1) continue;
      if (next < 0 || g.vertices.label(w) < g.vertices.label(next)) next = w;
    }
    path.push_back(next);
    v = next;
  }
  return path;
}

/// Loop-erased random walk from s until it hits d. A walk that has not hit d
/// after max_steps is abandoned and restarted, at most max_retries times.
inline std::vector<int> random_route(const DirectedGraph& g, int s, int d, Rng& rng, std::size_t max_steps = 10000,
                                     int max_retries = 100) {
  auto adj = g.adjacency();
  const std::size_t n = g.num_vertices();
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<int> path{s};
    std::vector<int> where(n, -1);
    where[static_cast<std::size_t>(s)] = 0;
    int v = s;
    for (std::size_t step = 0; v != d && step < max_steps; ++step) {
      const auto& out = adj[static_cast<std::size_t>(v)];
      if (out.empty()) break;
      int w = out[rng.below(out.size())];
      int seen_at = where[static_cast<std::size_t>(w)];
      if (seen_at >= 0) {
        for (std::size_t k = static_cast<std::size_t>(seen_at) + 1; k < path.size(); ++k)
          where[static_cast<std::size_t>(path[k])] = -1;
        path.resize(static_cast<std::size_t>(seen_at) + 1);
      } else {
        where[static_cast<std::size_t>(w)] = static_cast<int>(path.size());
        path.push_back(w);
      }
      v = w;
    }
    if (v == d) return path;
  }
  throw Unreachable("random_route: retry cap exhausted before reaching the destination");
}

/// Samples T simple paths from (pi, A). A step that revisits a state is
/// redrawn; a path is restarted after max_resample failed draws in a row, and
/// generation fails after max_restarts restarts for one path.
inline std::vector<std::vector<int>> markov_paths(const MarkovModel& m, std::size_t T,
                                                  const std::function<std::size_t(Rng&)>& length_sampler, Rng& rng,
                                                  int max_resample = 1000, int max_restarts = 1000) {
  std::vector<std::vector<int>> out;
  const std::size_t n = m.num_states();
  for (std::size_t p = 0; p < T; ++p) {
    const std::size_t len = length_sampler(rng);
    if (len == 0 || len > n) throw std::invalid_argument("markov_paths: path length must be in [1, |S|]");
    bool done = false;
    for (int restart = 0; restart < max_restarts && !done; ++restart) {
      std::vector<int> z;
      std::vector<char> used(n, 0);
      std::size_t first = rng.categorical(m.pi, 1.0);
      if (first >= n) throw std::invalid_argument("markov_paths: pi has no mass");
      z.push_back(static_cast<int>(first));
      used[first] = 1;
      while (z.size() < len) {
        auto row = m.A.row(static_cast<std::size_t>(z.back()));
        int tries = 0;
        std::size_t next = n;
        while (tries++ < max_resample) {
          std::size_t c = rng.categorical(row, 1.0);
          if (c < n && !used[c]) {
            next = c;
            break;
          }
        }
        if (next == n) break;
        used[next] = 1;
        z.push_back(static_cast<int>(next));
      }
      if (z.size() == len) {
        out.push_back(std::move(z));
        done = true;
      }
    }
    if (!done) throw std::runtime_error("markov_paths: resample cap exhausted");
  }
  return out;
}

struct ShuffledData {
  std::vector<Observation> observations;
  std::vector<Permutation> truth;  // unshuffle(observations[m], truth[m]) == paths[m]
};

/// Shuffles each path uniformly; KnownEndpoints keeps the first and last
/// element in place.
inline ShuffledData shuffle_paths(std::span<const std::vector<int>> paths, EndpointMode mode, Rng& rng) {
  ShuffledData out;
  for (const auto& z : paths) {
    const std::size_t n = z.size();
    Permutation sigma = Permutation::identity(n);  // observation slot -> path step
    if (mode == EndpointMode::KnownEndpoints && n > 2) {
      rng.shuffle(std::span(sigma.tau.begin() + 1, n - 2));
    } else if (mode == EndpointMode::Free) {
      rng.shuffle(std::span<int>(sigma.tau));
    }
    Observation o;
    o.mode = mode;
    o.positions.resize(n);
    for (std::size_t slot = 0; slot < n; ++slot)
      o.positions[slot] = z[static_cast<std::size_t>(sigma.tau[slot])];
    out.observations.push_back(std::move(o));
    out.truth.push_back(sigma.inverse());
  }
  return out;
}

}  // namespace nico
