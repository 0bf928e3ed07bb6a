#include <cmath>

#include <gtest/gtest.h>

#include "nico/exact_estep.hpp"
#include "oracles.hpp"

using namespace nico;

namespace {

MarkovModel example_model() {
  MarkovModel m({0.7, 0.3}, Matrix(2, 2));
  m.A(0, 0) = 0.2;
  m.A(0, 1) = 0.8;
  m.A(1, 0) = 0.6;
  m.A(1, 1) = 0.4;
  return m;
}

void expect_structure(const SufficientStats& s, double tol) {
  const std::size_t n = s.size();
  double r_total = 0.0, a_total = 0.0;
  for (std::size_t to = 0; to < n; ++to) {
    double row = s.r1[to];
    for (std::size_t from = 0; from < n; ++from) {
      row += s.alpha(to, from);
      a_total += s.alpha(to, from);
      EXPECT_GE(s.alpha(to, from), 0.0);
      EXPECT_LE(s.alpha(to, from), 1.0 + tol);
    }
    EXPECT_EQ(s.alpha(to, to), 0.0);
    EXPECT_NEAR(row, 1.0, tol);
    r_total += s.r1[to];
  }
  EXPECT_NEAR(r_total, 1.0, tol);
  EXPECT_NEAR(a_total, static_cast<double>(n) - 1.0, tol);
}

}  // namespace

TEST(EnumeratePermutations, CountsAndOrder) {
  auto two = enumerate_permutations(2, EndpointMode::Free);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].tau, (std::vector<int>{0, 1}));
  EXPECT_EQ(two[1].tau, (std::vector<int>{1, 0}));

  auto three = enumerate_permutations(3, EndpointMode::KnownEndpoints);
  ASSERT_EQ(three.size(), 1u);
  EXPECT_EQ(three[0].tau, (std::vector<int>{0, 1, 2}));

  auto four = enumerate_permutations(4, EndpointMode::KnownEndpoints);
  ASSERT_EQ(four.size(), 2u);
  EXPECT_EQ(four[0].tau, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(four[1].tau, (std::vector<int>{0, 2, 1, 3}));

  for (std::size_t n = 1; n <= 6; ++n) {
    auto all = enumerate_permutations(n, EndpointMode::Free);
    EXPECT_EQ(all.size(), static_cast<std::size_t>(permutation_count(n, EndpointMode::Free)));
    EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
    EXPECT_TRUE(std::adjacent_find(all.begin(), all.end()) == all.end());
  }
}

TEST(EnumeratePermutations, CapIsEnforced) {
  EXPECT_THROW(enumerate_permutations(13, EndpointMode::Free), EnumerationCapExceeded);
  EXPECT_THROW(enumerate_permutations(5, EndpointMode::Free, 4), EnumerationCapExceeded);
  EXPECT_THROW(enumerate_permutations(0, EndpointMode::Free), std::invalid_argument);
}

TEST(ExactStats, SymmetricModel) {
  MarkovModel m({0.5, 0.5}, Matrix(2, 2));
  m.A(0, 1) = 1.0;
  m.A(1, 0) = 1.0;
  auto r = exact_stats(m, {{0, 1}, EndpointMode::Free});
  EXPECT_NEAR(r.stats.r1[0], 0.5, 1e-15);
  EXPECT_NEAR(r.stats.r1[1], 0.5, 1e-15);
  EXPECT_NEAR(r.stats.alpha(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(r.stats.alpha(0, 1), 0.5, 1e-15);
}

TEST(ExactStats, TwoStateHandValues) {
  auto r = exact_stats(example_model(), {{0, 1}, EndpointMode::Free});
  // Orders (1,2) and (2,1) have probabilities 0.56 and 0.18.
  EXPECT_NEAR(r.stats.r1[0], 0.56 / 0.74, 1e-14);
  EXPECT_NEAR(r.stats.r1[1], 0.18 / 0.74, 1e-14);
  EXPECT_NEAR(r.stats.alpha(1, 0), 0.56 / 0.74, 1e-14);
  EXPECT_NEAR(r.stats.alpha(0, 1), 0.18 / 0.74, 1e-14);
  EXPECT_NEAR(r.log_marginal, std::log(0.37), 1e-14);
  EXPECT_NEAR(exact_obs_loglik(example_model(), {{0, 1}, EndpointMode::Free}), std::log(0.37), 1e-14);
}

TEST(ExactStats, KnownLengthThreeIsDeterministic) {
  Rng rng(5);
  auto m = oracle::random_model(6, rng);
  auto r = exact_stats(m, {{4, 1, 3}, EndpointMode::KnownEndpoints});
  EXPECT_EQ(r.stats.r1, (std::vector<double>{1, 0, 0}));
  EXPECT_DOUBLE_EQ(r.stats.alpha(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.stats.alpha(2, 1), 1.0);
  double total = 0.0;
  for (double v : r.stats.alpha.data()) total += v;
  EXPECT_DOUBLE_EQ(total, 2.0);
}

TEST(ExactStats, SingleVertex) {
  MarkovModel m({0.25, 0.75}, Matrix(2, 2, 0.5));
  auto r = exact_stats(m, {{1}, EndpointMode::Free});
  EXPECT_NEAR(r.log_marginal, std::log(0.75), 1e-15);
  EXPECT_EQ(r.stats.r1, (std::vector<double>{1.0}));
}

TEST(ExactStats, DeterministicChain) {
  // 0 -> 1 -> 2 -> 3 -> 0
  MarkovModel m({0.25, 0.25, 0.25, 0.25}, Matrix(4, 4));
  for (std::size_t i = 0; i < 4; ++i) m.A(i, (i + 1) % 4) = 1.0;
  Observation y{{2, 0, 1}, EndpointMode::Free};
  // Feasible orders: 0 1 2 only (starting at 0); 1 2 0 needs 2->0, not an edge.
  auto r = exact_stats(m, y);
  EXPECT_NEAR(r.log_marginal, std::log(0.25 / 6.0), 1e-14);
  EXPECT_DOUBLE_EQ(r.stats.r1[1], 1.0);
}

TEST(ExactStats, AllZeroOrdersThrow) {
  MarkovModel m({0.5, 0.5, 0.0}, Matrix(3, 3));
  for (std::size_t i = 0; i < 3; ++i) m.A(i, i) = 1.0;
  EXPECT_THROW(exact_stats(m, {{0, 1}, EndpointMode::Free}), UnsupportedObservation);
}

TEST(ExactStats, MatchesPosteriorDefinition) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const bool known = trial % 2 == 1;
    const std::size_t n = (known ? 2 : 1) + rng.below(known ? 5 : 6);
    auto m = oracle::random_model(10, rng, trial % 4 == 0 ? 0.3 : 0.0);
    auto y = oracle::random_observation(10, n, known, rng);
    auto ref = oracle::posterior_stats(m, y);
    if (ref.marginal == 0.0) continue;
    auto r = exact_stats(m, y);
    EXPECT_LE(oracle::max_abs_diff(r.stats.r1, ref.r1), 1e-12);
    EXPECT_LE(oracle::max_abs_diff(r.stats.alpha, ref.alpha), 1e-12);
    EXPECT_NEAR(r.log_marginal, std::log(ref.marginal), 1e-11);
    expect_structure(r.stats, 1e-9);
  }
}

TEST(ExactStats, KnownEqualsConditionedFree) {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    auto m = oracle::random_model(9, rng);
    auto y = oracle::random_observation(9, n, true, rng);
    // Condition the free posterior on tau_1 = 1 and tau_N = N.
    Observation free_y = y;
    free_y.mode = EndpointMode::Free;
    auto full = oracle::posterior_stats(m, free_y);
    std::vector<double> r1(n, 0.0);
    Matrix alpha(n, n, 0.0);
    double mass = 0.0;
    for (std::size_t k = 0; k < full.orders.size(); ++k) {
      const auto& tau = full.orders[k];
      if (tau.front() != 0 || tau.back() != static_cast<int>(n) - 1) continue;
      mass += full.posterior[k];
      r1[static_cast<std::size_t>(tau[0])] += full.posterior[k];
      for (std::size_t t = 1; t < n; ++t)
        alpha(static_cast<std::size_t>(tau[t]), static_cast<std::size_t>(tau[t - 1])) += full.posterior[k];
    }
    for (auto& v : r1) v /= mass;
    for (auto& v : alpha.data()) v /= mass;
    auto r = exact_stats(m, y);
    EXPECT_LE(oracle::max_abs_diff(r.stats.r1, r1), 1e-12);
    EXPECT_LE(oracle::max_abs_diff(r.stats.alpha, alpha), 1e-12);
  }
}

TEST(ExactStats, TinyProbabilitiesDoNotUnderflow) {
  // Every path probability is around 1e-400, below the double range.
  const std::size_t n = 6;
  MarkovModel m;
  m.pi.assign(n, 1.0 / n);
  m.A = Matrix(n, n, 1e-80);
  for (std::size_t i = 0; i < n; ++i) m.A(i, i) = 1.0 - 1e-80 * (n - 1);
  Observation y{{0, 1, 2, 3, 4, 5}, EndpointMode::Free};
  auto r = exact_stats(m, y);
  EXPECT_TRUE(std::isfinite(r.log_marginal));
  EXPECT_NEAR(r.log_marginal, std::log(1.0 / n) + 5 * std::log(1e-80), 1e-9);
  for (double v : r.stats.r1) EXPECT_NEAR(v, 1.0 / n, 1e-12);
  expect_structure(r.stats, 1e-9);
}

TEST(ExactBestOrder, MatchesBruteForceWithLexTies) {
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const bool known = trial % 3 == 0;
    const std::size_t n = (known ? 2 : 1) + rng.below(5);
    // A coarse model produces many exact ties.
    auto m = trial % 2 ? oracle::random_model(7, rng) : MarkovModel::uniform(7);
    auto y = oracle::random_observation(7, n, known, rng);
    auto orders = oracle::all_orders(n, known);
    double best = -1.0;
    std::vector<int> arg;
    for (const auto& tau : orders) {
      std::vector<int> z(n);
      for (std::size_t t = 0; t < n; ++t) z[t] = y.positions[static_cast<std::size_t>(tau[t])];
      double p = oracle::path_prob(m, z);
      if (p > best) {
        best = p;
        arg = tau;
      }
    }
    auto [perm, lp] = exact_best_order(m, y);
    EXPECT_NEAR(std::exp(lp), best, 1e-12 * best);
    if (trial % 2 == 0) {
      EXPECT_EQ(perm.tau, arg);
    } else {
      std::vector<int> z(n);
      for (std::size_t t = 0; t < n; ++t) z[t] = y.positions[static_cast<std::size_t>(perm.tau[t])];
      EXPECT_NEAR(oracle::path_prob(m, z), best, 1e-12 * best);
    }
  }
}
