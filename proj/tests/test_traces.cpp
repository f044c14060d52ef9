#include <gtest/gtest.h>

#include <cmath>

#include "etdlab/envs.hpp"
#include "etdlab/errors.hpp"
#include "etdlab/traces.hpp"

using namespace etdlab;

namespace {

// F^(n) by its block definition over a stored factor sequence g[1..t].
std::vector<double> netd_by_definition(const std::vector<double>& g, std::size_t n) {
  std::vector<double> f(g.size(), 1.0);
  for (std::size_t t = n; t < g.size(); ++t) {
    double w = 1.0;
    for (std::size_t k = t - n + 1; k <= t; ++k) w *= g[k];
    f[t] = w * f[t - n] + 1.0;
  }
  return f;
}

}  // namespace

TEST(Followon, FirstValueIsOne) {
  auto s = EmphasisState::followon();
  EXPECT_DOUBLE_EQ(s.advance(123.0), 1.0);
  EXPECT_EQ(s.t(), 0);
}

TEST(Followon, FixedPointOnPolicy) {
  auto s = EmphasisState::followon();
  double f = 0.0;
  for (int t = 0; t < 5000; ++t) f = s.advance(0.99);
  EXPECT_NEAR(f, 100.0, 1e-6);
}

TEST(Followon, StepMatchesRecursion) {
  auto s = EmphasisState::followon();
  followon_step(s, 0.9, 2.0);
  EXPECT_DOUBLE_EQ(s.value(), 1.0);
  EXPECT_DOUBLE_EQ(followon_step(s, 0.9, 2.0), 0.9 * 2.0 + 1.0);
  EXPECT_DOUBLE_EQ(followon_step(s, 0.5, 0.0), 1.0);
}

TEST(Followon, RejectsNegativeInputs) {
  auto s = EmphasisState::followon();
  s.advance(0.0);
  EXPECT_THROW(followon_step(s, -0.1, 1.0), ContractViolation);
  EXPECT_THROW(followon_step(s, 0.9, -1.0), ContractViolation);
}

TEST(Followon, MaxTraceCaps) {
  auto s = EmphasisState::followon(5.0);
  double f = 0.0;
  for (int t = 0; t < 100; ++t) f = s.advance(2.0);
  EXPECT_DOUBLE_EQ(f, 5.0);
}

TEST(Netd, FirstNValuesAreOne) {
  auto s = EmphasisState::netd(4);
  for (int t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(s.advance(3.0), 1.0);
  EXPECT_DOUBLE_EQ(s.advance(3.0), 81.0 + 1.0);
}

TEST(Netd, StepBeforeHistoryThrows) {
  auto s = EmphasisState::netd(3);
  s.advance(1.0);
  EXPECT_THROW(netd_step(s, 1.0), ContractViolation);
  EXPECT_THROW(EmphasisState::netd(0), ContractViolation);
}

TEST(Netd, OnPolicyFixedPoints) {
  for (std::size_t n : {1u, 10u, 30u, 100u}) {
    auto s = EmphasisState::netd(n);
    double f = 0.0;
    for (int t = 0; t < 200000; ++t) f = s.advance(0.99);
    EXPECT_NEAR(f, 1.0 / (1.0 - std::pow(0.99, static_cast<double>(n))), 1e-6) << "n=" << n;
  }
}

TEST(Netd, NEqualsOneIsFollowon) {
  Rng rng = make_rng(2);
  auto a = EmphasisState::netd(1);
  auto b = EmphasisState::followon();
  for (int t = 0; t < 200; ++t) {
    const double g = 1.5 * uniform01(rng);
    EXPECT_NEAR(a.advance(g), b.advance(g), 1e-12 * b.value());
  }
}

TEST(Netd, DelayLineMatchesBlockDefinition) {
  Rng rng = make_rng(5);
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<double> g(60);
    for (auto& x : g) x = 0.3 + 1.2 * uniform01(rng);
    const auto oracle = netd_by_definition(g, n);
    auto s = EmphasisState::netd(n);
    for (std::size_t t = 0; t < g.size(); ++t) EXPECT_NEAR(s.advance(g[t]), oracle[t], 1e-12 * oracle[t]);
  }
}

TEST(Netd, DominatedByFollowon) {
  // F_t > F^(n)_t for t > 0 whenever every factor is positive.
  Rng rng = make_rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rep % 4;
    auto f = EmphasisState::followon();
    auto g = EmphasisState::netd(n);
    f.advance(0.0);
    g.advance(0.0);
    for (int t = 1; t < 80; ++t) {
      const double factor = 0.05 + 1.9 * uniform01(rng);
      EXPECT_GT(f.advance(factor), g.advance(factor));
    }
  }
}

TEST(Emphasis, WetdInterpolation) {
  EXPECT_DOUBLE_EQ(wetd_emphasis(7.0, 0.0, 1.0), 7.0);
  EXPECT_DOUBLE_EQ(wetd_emphasis(7.0, 1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(wetd_emphasis(7.0, 0.0, 0.5), 4.0);
}

TEST(Schedules, LambdaZeroAtWindowStarts) {
  for (std::size_t t = 0; t < 12; ++t) EXPECT_DOUBLE_EQ(lambda_schedule(t, 3), t % 3 == 0 ? 0.0 : 1.0);
  EXPECT_DOUBLE_EQ(lambda_v_schedule(4, 3, 2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(lambda_v_schedule(4, 3, 0.5, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(lambda_v_schedule(3, 3, 2.0, 1.0), 0.0);
  EXPECT_THROW(lambda_schedule(1, 0), ContractViolation);
}

TEST(VtracePolicy, TwoStateNormalizerAndRatio) {
  const auto env = make_two_state();
  // nu = min(0.5, 0) + min(0.5, 1) = 0.5; rho^v(right) = min(1, 2) / 0.5.
  EXPECT_DOUBLE_EQ(vtrace_normalizer(env.target, env.behavior, 1.0, 0), 0.5);
  EXPECT_DOUBLE_EQ(rho_v(env.target, env.behavior, 1.0, 0, 1), 2.0);
  EXPECT_DOUBLE_EQ(rho_v(env.target, env.behavior, 1.0, 0, 0), 0.0);
}

TEST(VtracePolicy, ClippedPolicyIsDistribution) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto env = make_random_mdp(seed, 4, 3, 2, 0.9);
    for (double rho_bar : {0.5, 1.0, 3.0})
      for (std::size_t s = 0; s < 4; ++s) {
        double total = 0.0;
        for (std::size_t a = 0; a < 3; ++a) total += env.behavior(s, a) * rho_v(env.target, env.behavior, rho_bar, s, a);
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
  }
}

TEST(VtracePolicy, DegenerateRowThrows) {
  const auto pi = Policy::deterministic(1, 2, 0);
  Matrix m(1, 2);
  m << 0.0, 1.0;
  const Policy mu(m);
  EXPECT_THROW(rho_v(pi, mu, 1.0, 0, 1), DegeneratePolicyError);
}

TEST(TraceDiscount, BetaOnlyWhenContinuing) {
  TraceWeights w;
  w.beta = 0.5;
  EXPECT_DOUBLE_EQ(trace_discount(0.9, w), 0.5);
  EXPECT_DOUBLE_EQ(trace_discount(0.0, w), 0.0);
  w.beta.reset();
  EXPECT_DOUBLE_EQ(trace_discount(0.9, w), 0.9);
}
