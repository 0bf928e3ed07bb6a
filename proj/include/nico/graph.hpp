#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nico/model.hpp"

namespace nico {

/// Labeled vertices and a set of directed edges between vertex indices.
struct DirectedGraph {
  StateSpace vertices;
  std::set<std::pair<int, int>> edges;

  DirectedGraph() = default;
  explicit DirectedGraph(StateSpace v) : vertices(std::move(v)) {}

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_edges() const { return edges.size(); }

  void add_edge(int from, int to) { edges.emplace(from, to); }
  void add_edge(const std::string& from, const std::string& to) {
    const int a = vertices.add(from);
    const int b = vertices.add(to);
    edges.emplace(a, b);
  }
  bool has_edge(int from, int to) const { return edges.count({from, to}) > 0; }

  /// Out-neighbour lists, each sorted by vertex index.
  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(num_vertices());
    for (auto [a, b] : edges) adj[static_cast<std::size_t>(a)].push_back(b);
    return adj;
  }

  /// Edges as label pairs, for comparing graphs over different index maps.
  std::set<std::pair<std::string, std::string>> labeled_edges() const {
    std::set<std::pair<std::string, std::string>> out;
    for (auto [a, b] : edges) out.emplace(vertices.label(a), vertices.label(b));
    return out;
  }
};

}  // namespace nico
