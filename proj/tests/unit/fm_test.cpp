#include <map>

#include <gtest/gtest.h>

#include "nico/fm.hpp"
#include "nico/simgen.hpp"

using namespace nico;

TEST(Cooccurrence, SymmetricCounts) {
  std::vector<Observation> obs{{{0, 1, 2}, EndpointMode::KnownEndpoints},
                               {{0, 2}, EndpointMode::KnownEndpoints},
                               {{1, 2, 3}, EndpointMode::KnownEndpoints}};
  auto c = cooccurrence_counts(obs);
  EXPECT_EQ(c(0, 1), 1);
  EXPECT_EQ(c(1, 0), 1);
  EXPECT_EQ(c(0, 2), 2);
  EXPECT_EQ(c(2, 1), 2);
  EXPECT_EQ(c(1, 3), 1);
  EXPECT_EQ(c(0, 3), 0);
  EXPECT_EQ(c(2, 2), 0);
  EXPECT_EQ(c.pairs(), 5u);
}

TEST(FmOrder, SortsInteriorByScore) {
  Observation main{{0, 3, 1, 2, 5}, EndpointMode::KnownEndpoints};
  std::vector<Observation> obs{main,
                               {{0, 1}, EndpointMode::KnownEndpoints},
                               {{0, 1}, EndpointMode::KnownEndpoints},
                               {{0, 2}, EndpointMode::KnownEndpoints},
                               {{3, 5}, EndpointMode::KnownEndpoints}};
  // Scores: vertex 1 -> 2, vertex 2 -> 1, vertex 3 -> -1.
  auto counts = cooccurrence_counts(obs);
  Rng rng(1);
  auto p = fm_order(main, counts, rng);
  EXPECT_EQ(unshuffle(main, p), (std::vector<int>{0, 1, 2, 3, 5}));
}

TEST(FmOrder, ShortPathsAreIdentityAndFreeRejected) {
  CooccurrenceCounts c;
  Rng rng(2);
  EXPECT_EQ(fm_order({{4, 2, 7}, EndpointMode::KnownEndpoints}, c, rng).tau, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(fm_order({{4, 2}, EndpointMode::KnownEndpoints}, c, rng).tau, (std::vector<int>{0, 1}));
  EXPECT_THROW(fm_order({{4, 2, 7}, EndpointMode::Free}, c, rng), std::invalid_argument);
}

TEST(FmOrder, TiesAreShuffledUniformly) {
  Observation y{{0, 1, 2, 3, 4}, EndpointMode::KnownEndpoints};
  CooccurrenceCounts c;  // every score is zero
  Rng rng(3);
  std::map<std::vector<int>, int> seen;
  const int reps = 6000;
  for (int i = 0; i < reps; ++i) ++seen[fm_order(y, c, rng).tau];
  ASSERT_EQ(seen.size(), 6u);
  double chi2 = 0.0;
  for (const auto& [tau, k] : seen) chi2 += (k - reps / 6.0) * (k - reps / 6.0) / (reps / 6.0);
  EXPECT_LT(chi2, 20.5);  // 5 degrees of freedom, p = 0.001
}

TEST(FmOrder, CustomScore) {
  Observation y{{0, 1, 2, 3, 9}, EndpointMode::KnownEndpoints};
  CooccurrenceCounts c;
  Rng rng(4);
  auto by_label = [](const CooccurrenceCounts&, int, int v, int) { return -static_cast<double>(v); };
  auto p = fm_order(y, c, rng, by_label);
  EXPECT_EQ(unshuffle(y, p), (std::vector<int>{0, 1, 2, 3, 9}));
  auto reversed = [](const CooccurrenceCounts&, int, int v, int) { return static_cast<double>(v); };
  EXPECT_EQ(unshuffle(y, fm_order(y, c, rng, reversed)), (std::vector<int>{0, 3, 2, 1, 9}));
}

TEST(FmReconstruct, GraphIsFeasibleAndDeterministic) {
  Rng rng(5);
  auto rgg = random_geometric_graph(30, default_radius(30) * 1.5, rng);
  ASSERT_TRUE(rgg.connected);
  std::vector<std::vector<int>> paths;
  for (int k = 0; k < 20; ++k) {
    int s = static_cast<int>(rng.below(30));
    int d = static_cast<int>(rng.below(30));
    if (s != d) paths.push_back(shortest_path_route(rgg.graph, s, d));
  }
  auto data = shuffle_paths(paths, EndpointMode::KnownEndpoints, rng);
  auto a = fm_reconstruct(data.observations, rgg.graph.vertices, 11);
  auto b = fm_reconstruct(data.observations, rgg.graph.vertices, 11);
  EXPECT_EQ(a.graph.edges, b.graph.edges);
  EXPECT_TRUE(feasibility_check(a.graph, data.observations, a.orders));
  for (std::size_t m = 0; m < paths.size(); ++m) {
    auto z = unshuffle(data.observations[m], a.orders[m]);
    EXPECT_EQ(z.front(), paths[m].front());
    EXPECT_EQ(z.back(), paths[m].back());
    if (paths[m].size() <= 3) {
      EXPECT_EQ(z, paths[m]);
    }
  }
}
