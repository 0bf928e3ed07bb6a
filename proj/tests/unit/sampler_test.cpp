#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "nico/exact_estep.hpp"
#include "nico/sampler.hpp"
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

MarkovModel cycle(std::size_t n) {
  MarkovModel m(std::vector<double>(n, 1.0 / static_cast<double>(n)), Matrix(n, n));
  for (std::size_t i = 0; i < n; ++i) m.A(i, (i + 1) % n) = 1.0;
  return m;
}

}  // namespace

TEST(CausalSampler, UniformModelGivesEqualWeights) {
  auto m = MarkovModel::uniform(6);
  Observation y{{0, 2, 3, 5}, EndpointMode::Free};
  Rng rng(1);
  auto samples = draw_samples(m, y, 200, Scheme::Causal, rng);
  for (const auto& s : samples) EXPECT_NEAR(s.log_weight, samples[0].log_weight, 1e-12);
  auto dist = empirical_perm_dist(samples);
  double total = 0.0;
  for (const auto& [p, q] : dist) total += q;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(is_stats_from_samples(y, samples).diagnostics.ess, 200.0, 1e-9);
}

TEST(CausalSampler, DeterministicChainHasOneOrder) {
  auto m = cycle(6);
  Observation y{{3, 1, 2}, EndpointMode::Free};
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    auto s = draw_causal_sample(m, y, rng);
    if (s.perm.tau == std::vector<int>{1, 2, 0}) {
      // Normalizers after the first step are single nonzero entries: 1 * 1.
      EXPECT_NEAR(s.log_weight, 0.0, 1e-15);
      EXPECT_FALSE(s.dead_end);
    } else {
      // Starting at 2 or 3 leaves a state that cannot be reached.
      EXPECT_TRUE(s.dead_end);
      EXPECT_EQ(s.log_weight, kNegInf);
    }
  }
}

TEST(CausalSampler, TwoStateEstimate) {
  Rng rng(3);
  auto r = is_stats(example_model(), {{0, 1}, EndpointMode::Free}, 100000, Scheme::Causal, rng);
  EXPECT_NEAR(r.stats.r1[0], 0.7568, 0.01);
}

TEST(UniformSampler, TwoStateEstimateAndWeights) {
  Rng rng(4);
  auto m = example_model();
  Observation y{{0, 1}, EndpointMode::Free};
  auto s = draw_uniform_sample(m, y, rng);
  EXPECT_NEAR(s.log_weight, s.log_target_unnorm, 0.0);
  auto r = is_stats(m, y, 100000, Scheme::Uniform, rng);
  EXPECT_NEAR(r.stats.r1[0], 0.56 / 0.74, 0.01);
}

TEST(UniformSampler, UniformModelEqualWeightsAndKnownEndpointsFixed) {
  auto m = MarkovModel::uniform(8);
  Observation y{{0, 2, 4, 6, 7}, EndpointMode::KnownEndpoints};
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    auto s = draw_uniform_sample(m, y, rng);
    EXPECT_EQ(s.perm.tau.front(), 0);
    EXPECT_EQ(s.perm.tau.back(), 4);
    EXPECT_NEAR(s.log_weight, std::log(1.0 / 8) + 4 * std::log(1.0 / 8), 1e-12);
  }
}

TEST(CausalSampler, KnownEndpointsPinSourceAndDestination) {
  Rng rng(6);
  auto m = oracle::random_model(9, rng);
  Observation y{{4, 0, 8, 2, 6, 1}, EndpointMode::KnownEndpoints};
  for (int i = 0; i < 200; ++i) {
    auto s = draw_causal_sample(m, y, rng);
    EXPECT_EQ(s.perm.tau.front(), 0);
    EXPECT_EQ(s.perm.tau.back(), 5);
  }
}

TEST(CausalSampler, WeightIsTargetOverProposal) {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const bool known = trial % 2 == 0;
    auto m = oracle::random_model(8, rng);
    auto y = oracle::random_observation(8, 2 + rng.below(5), known, rng);
    double first_norm = 0.0;
    for (int s : y.positions) first_norm += m.pi[static_cast<std::size_t>(s)];
    for (int i = 0; i < 20; ++i) {
      auto s = draw_causal_sample(m, y, rng);
      if (s.log_weight == kNegInf) continue;
      const double log_r = causal_proposal_log_prob(m, y, s.perm);
      // log_ratio = log P - log R, with R the fully normalized proposal.
      EXPECT_NEAR(s.log_ratio, s.log_target_unnorm - log_r, 1e-10);
      const double expected_weight = known ? s.log_target_unnorm - log_r : s.log_target_unnorm - log_r - std::log(first_norm);
      EXPECT_NEAR(s.log_weight, expected_weight, 1e-10);
    }
  }
}

TEST(CausalSampler, EmpiricalFrequenciesMatchClosedForm) {
  Rng rng(8);
  auto m = oracle::random_model(6, rng);
  for (bool known : {false, true}) {
    Observation y{{5, 1, 3, 0, 2}, known ? EndpointMode::KnownEndpoints : EndpointMode::Free};
    const std::size_t L = 100000;
    std::map<std::vector<int>, std::size_t> counts;
    for (std::size_t i = 0; i < L; ++i) ++counts[draw_causal_sample(m, y, rng).perm.tau];
    double total_prob = 0.0;
    for (const auto& p : enumerate_permutations(y.size(), y.mode)) {
      const double q = std::exp(causal_proposal_log_prob(m, y, p));
      total_prob += q;
      const double sigma = std::sqrt(L * q * (1.0 - q));
      EXPECT_LE(std::abs(static_cast<double>(counts[p.tau]) - L * q), 4.0 * sigma + 1.0) << "known=" << known;
    }
    EXPECT_NEAR(total_prob, 1.0, 1e-12);
  }
}

TEST(IsStats, SingleSampleIsIndicator) {
  Rng rng(9);
  auto m = oracle::random_model(7, rng);
  Observation y{{0, 3, 5, 6}, EndpointMode::Free};
  Rng a(10), b(10);
  auto r = is_stats(m, y, 1, Scheme::Causal, a);
  auto s = draw_causal_sample(m, y, b);
  std::vector<double> r1(4, 0.0);
  r1[static_cast<std::size_t>(s.perm.tau[0])] = 1.0;
  EXPECT_EQ(r.stats.r1, r1);
  for (std::size_t t = 1; t < 4; ++t)
    EXPECT_EQ(r.stats.alpha(static_cast<std::size_t>(s.perm.tau[t]), static_cast<std::size_t>(s.perm.tau[t - 1])), 1.0);
  EXPECT_NEAR(r.diagnostics.ess, 1.0, 1e-12);
}

TEST(IsStats, KnownLengthTwoIsDeterministic) {
  Rng rng(11);
  auto m = oracle::random_model(5, rng);
  Observation y{{3, 1}, EndpointMode::KnownEndpoints};
  for (std::size_t L : {1u, 7u, 100u}) {
    auto r = is_stats(m, y, L, Scheme::Causal, rng);
    EXPECT_EQ(r.stats.r1, (std::vector<double>{1.0, 0.0}));
    EXPECT_DOUBLE_EQ(r.stats.alpha(1, 0), 1.0);
    EXPECT_NEAR(r.diagnostics.log_marginal, exact_obs_loglik(m, y), 1e-12);
  }
}

TEST(IsStats, CloseToExactAtLargeL) {
  Rng rng(12);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    auto m = oracle::random_model(10, rng);
    auto y = oracle::random_observation(10, 6, false, rng);
    auto exact = exact_stats(m, y);
    auto r = is_stats(m, y, 50000, Scheme::Causal, rng);
    worst = std::max({worst, oracle::max_abs_diff(r.stats.r1, exact.stats.r1),
                      oracle::max_abs_diff(r.stats.alpha, exact.stats.alpha)});
    EXPECT_NEAR(r.diagnostics.log_marginal, exact.log_marginal, 0.02);
  }
  EXPECT_LE(worst, 0.02);
}

TEST(IsStats, StructureHoldsForSampledStats) {
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    auto m = oracle::random_model(12, rng, 0.2);
    auto y = oracle::random_observation(12, 2 + rng.below(9), trial % 2 == 0, rng);
    IsResult r;
    try {
      r = is_stats(m, y, 500, trial % 3 ? Scheme::Causal : Scheme::Uniform, rng);
    } catch (const UnsupportedObservation&) {
      continue;
    }
    const std::size_t n = y.size();
    double total = 0.0, r_total = 0.0;
    for (std::size_t to = 0; to < n; ++to) {
      double row = r.stats.r1[to];
      for (std::size_t from = 0; from < n; ++from) row += r.stats.alpha(to, from);
      EXPECT_NEAR(row, 1.0, 1e-9);
      r_total += r.stats.r1[to];
    }
    for (double v : r.stats.alpha.data()) total += v;
    EXPECT_NEAR(total, n - 1.0, 1e-9);
    EXPECT_NEAR(r_total, 1.0, 1e-9);
  }
}

TEST(IsStats, AllZeroWeightsThrow) {
  auto m = cycle(5);
  Observation y{{0, 2}, EndpointMode::Free};  // neither order is a cycle edge
  Rng rng(14);
  EXPECT_THROW(is_stats(m, y, 100, Scheme::Causal, rng), UnsupportedObservation);
  EXPECT_THROW(is_stats(m, y, 0, Scheme::Causal, rng), std::invalid_argument);
}

TEST(PermDistribution, EmpiricalExamples) {
  PermutationSample a{Permutation{{0, 1}}, 0.0, 0.0, 0.0, false};
  auto one = empirical_perm_dist(std::vector<PermutationSample>{a});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one.begin()->second, 1.0);

  PermutationSample b{Permutation{{1, 0}}, 0.0, 0.0, 0.0, false};
  auto half = empirical_perm_dist(std::vector<PermutationSample>{a, b});
  EXPECT_DOUBLE_EQ(half[a.perm], 0.5);
  EXPECT_DOUBLE_EQ(half[b.perm], 0.5);

  b.log_weight = std::log(3.0);
  auto skew = empirical_perm_dist(std::vector<PermutationSample>{a, b});
  EXPECT_NEAR(skew[a.perm], 0.25, 1e-15);
  EXPECT_NEAR(skew[b.perm], 0.75, 1e-15);

  a.log_weight = kNegInf;
  EXPECT_THROW(empirical_perm_dist(std::vector<PermutationSample>{a}), std::invalid_argument);
}

TEST(PermDistribution, L1Examples) {
  Permutation p{{0, 1}}, q{{1, 0}};
  PermDistribution x{{p, 1.0}}, y{{q, 1.0}}, h{{p, 0.5}, {q, 0.5}};
  EXPECT_DOUBLE_EQ(l1_distance(x, x), 0.0);
  EXPECT_DOUBLE_EQ(l1_distance(x, y), 2.0);
  EXPECT_DOUBLE_EQ(l1_distance(x, h), 1.0);
  EXPECT_DOUBLE_EQ(l1_distance(h, x), 1.0);
}

TEST(PermDistribution, StatsErrorBoundedByL1) {
  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = oracle::random_model(8, rng);
    auto y = oracle::random_observation(8, 5, false, rng);
    auto samples = draw_samples(m, y, 300, Scheme::Causal, rng);
    auto is = is_stats_from_samples(y, samples);
    auto exact = exact_stats(m, y);
    const double l1 = l1_distance(exact_perm_posterior(m, y), empirical_perm_dist(samples));
    EXPECT_LE(oracle::max_abs_diff(is.stats.r1, exact.stats.r1), l1 + 1e-12);
    EXPECT_LE(oracle::max_abs_diff(is.stats.alpha, exact.stats.alpha), l1 + 1e-12);
  }
}

TEST(ComputeBm, Examples) {
  Observation y{{0, 2, 3, 5}, EndpointMode::Free};
  EXPECT_NEAR(compute_bm(MarkovModel::uniform(6), y), 1.0, 1e-12);
  // One feasible order; the proposal picks its start with probability 1/3.
  auto c = cycle(6);
  EXPECT_NEAR(compute_bm(c, {{2, 0, 1}, EndpointMode::Free}), 3.0, 1e-12);
  // Posterior (0.56, 0.18) / 0.74 against proposal (0.7, 0.3).
  EXPECT_NEAR(compute_bm(example_model(), {{0, 1}, EndpointMode::Free}), 0.56 / 0.74 / 0.7, 1e-12);
}

TEST(ComputeBm, AtLeastOneAndCapped) {
  Rng rng(16);
  auto m = oracle::random_model(8, rng);
  auto y = oracle::random_observation(8, 5, false, rng);
  EXPECT_GE(compute_bm(m, y), 1.0 - 1e-12);
  EXPECT_THROW(compute_bm(m, oracle::random_observation(8, 5, false, rng), 4), EnumerationCapExceeded);
}

TEST(Bounds, PamHandValue) {
  BoundInputs in;
  in.T = 1;
  in.N = {2};
  in.b = {1};
  in.theta_min = std::exp(-1.0);
  in.epsilon = 1.0;
  in.delta = 0.5;
  // 2 * 1 * 16 * 1 * 1 / 1 * log(2 * 4 / 0.5) = 32 log 16.
  EXPECT_NEAR(pam_sample_size_raw(in, 0), 32.0 * std::log(16.0), 1e-12);
  EXPECT_EQ(pam_sample_size(in, 0), 89.0);
}

TEST(Bounds, PamScalingAndLimits) {
  BoundInputs in;
  in.T = 3;
  in.N = {4, 5, 9};
  in.b = {1.5, 2.0, 0.5};
  in.theta_min = 1e-3;
  in.epsilon = 0.2;
  in.delta = 0.1;
  const double base = pam_sample_size_raw(in, 1);
  in.epsilon = 0.4;
  EXPECT_NEAR(pam_sample_size_raw(in, 1), base / 4.0, base * 1e-14);
  in.delta = 1.0;
  const double n = 5;
  const double coeff = 2.0 * 9 * std::pow(n, 4) * 4.0 * std::pow(std::log(1e-3), 2) / (0.4 * 0.4);
  EXPECT_NEAR(pam_sample_size_raw(in, 1), coeff * std::log(2 * n * n), 1e-9 * coeff);
  in.theta_min = 0.0;
  EXPECT_THROW(pam_sample_size_raw(in, 1), std::invalid_argument);
}

TEST(Bounds, MonotoneValuesAndLimits) {
  BoundInputs in;
  in.T = 1;
  in.N = {2};
  in.b = {1};
  in.lambda = 1.0;
  in.delta_star = 2.0;
  in.delta = 0.25;
  // ((2*2 + 2) / 2)^2 = 9; log(4 * 4 / 0.25) = log 64.
  EXPECT_NEAR(*monotone_sample_size_raw(in, 0), 27.0 * 9.0 * std::log(64.0), 1e-10);
  EXPECT_EQ(*monotone_sample_size(in, 0), std::ceil(27.0 * 9.0 * std::log(64.0)));
  const double base = *monotone_sample_size_raw(in, 0);
  in.b = {2};
  EXPECT_NEAR(*monotone_sample_size_raw(in, 0), 2.0 * base, 1e-10);
  in.b = {1};
  in.delta_star = 1e12;
  EXPECT_NEAR(*monotone_sample_size_raw(in, 0), 27.0 * std::log(64.0), 1e-6);
  in.delta_star = 0.0;
  EXPECT_FALSE(monotone_sample_size(in, 0).has_value());
  in.delta_star = 1.0;
  in.lambda.reset();
  EXPECT_FALSE(monotone_sample_size(in, 0).has_value());
}

TEST(Bounds, InvalidInputs) {
  BoundInputs in;
  in.T = 2;
  in.N = {2};
  in.b = {1, 1};
  in.theta_min = 0.1;
  EXPECT_THROW(pam_sample_size(in, 0), std::invalid_argument);
  in.N = {2, 3};
  in.b = {1, 0};
  EXPECT_THROW(pam_sample_size(in, 0), std::invalid_argument);
  in.b = {1, 1};
  in.delta = 0.0;
  EXPECT_THROW(pam_sample_size(in, 0), std::invalid_argument);
}

// A self-normalized estimator with weights in [0, b] and mean weight b/2
// stays within sqrt(2 b^2 log(2/delta) / L) with probability 1 - delta.
TEST(Concentration, BoundedRatioEstimator) {
  const double b = 2.0;
  const std::size_t L = 200, reps = 2000;
  const double delta = 0.1;
  Rng rng(17);
  // X ~ Bernoulli(0.3), weight Z uniform on [0, b] independent of X: E[XZ]/E[Z] = 0.3.
  const double mu = 0.3;
  const double eps = std::sqrt(2.0 * b * b * std::log(2.0 / delta) / static_cast<double>(L));
  std::size_t exceed = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      const double x = rng.uniform() < mu ? 1.0 : 0.0;
      const double z = rng.uniform() * b;
      num += x * z;
      den += z;
    }
    if (std::abs(num / den - mu) >= eps) ++exceed;
  }
  const double sigma = std::sqrt(delta * (1 - delta) / reps);
  EXPECT_LE(static_cast<double>(exceed) / reps, delta + 3 * sigma);
}
