#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace rhogap;
using testing_support::vec2;

namespace {

BoundConfig default_bounds(LipschitzConstants L = {}) { return {1e-4, 1e-2, 5.0, 2, L}; }

GPModel benchmark_model() {
  static const TrainingSet d = testing_support::small_benchmark_data(300, 4);
  return GPModel(d, {2.5, 1.0, 2.5, 1.6, 0.25}, constant_prior(0.0, 20.0));
}

}  // namespace

TEST(Beta, SpotValueMatchesFormula) {
  const double b = beta(default_bounds());
  EXPECT_NEAR(b, oracle::beta(2, 5.0, 1e-4, 1e-2), 1e-6);
  EXPECT_NEAR(b, 52.49, 5e-3);
}

TEST(Beta, MonotoneAndAdditiveInDelta) {
  BoundConfig c = default_bounds();
  const double b0 = beta(c);
  c.tau = 2e-4;
  EXPECT_LT(beta(c), b0);
  c = default_bounds();
  c.delta = 0.02;
  EXPECT_LT(beta(c), b0);
  c.delta = 0.005;
  EXPECT_NEAR(beta(c) - b0, 2.0 * std::log(2.0), 1e-12);
  c.delta = 1.0 - 1e-12;
  c.tau = 1e12;
  EXPECT_GT(beta(c), 0.0);
  EXPECT_LT(beta(c), 1e-9);
}

TEST(Beta, RejectsInvalidConfig) {
  BoundConfig c = default_bounds();
  c.delta = 1.0;
  EXPECT_THROW(beta(c), ArgumentError);
  c = default_bounds();
  c.tau = 0.0;
  EXPECT_THROW(beta(c), ArgumentError);
}

TEST(Gamma, ZeroAndLinearCases) {
  EXPECT_EQ(gamma_f(default_bounds()), 0.0);
  EXPECT_EQ(gamma_g(default_bounds()), 0.0);
  LipschitzConstants L;
  L.mu_f = 1.0;
  L.f = 1.0;
  EXPECT_NEAR(gamma_f(default_bounds(L)), 2e-4, 1e-18);
}

TEST(Gamma, NondecreasingInEachConstant) {
  LipschitzConstants L{0.5, 0.7, 0.3, 0.9, 1.0, 1.4};
  const double gf = gamma_f(default_bounds(L));
  const double gg = gamma_g(default_bounds(L));
  for (double* p : {&L.mu_f, &L.var_f, &L.f}) {
    LipschitzConstants M = L;
    *(p - &L.mu_f + &M.mu_f) *= 2.0;
    EXPECT_GT(gamma_f(default_bounds(M)), gf);
  }
  for (double* p : {&L.mu_g, &L.var_g, &L.g}) {
    LipschitzConstants M = L;
    *(p - &L.mu_f + &M.mu_f) *= 2.0;
    EXPECT_GT(gamma_g(default_bounds(M)), gg);
  }
}

TEST(UniformBound, PriorTubeWithoutData) {
  const Hyperparameters h{2.0, 3.0, 1.0, 1.0, 0.1};
  const GPModel m(TrainingSet(2, 0.1), h, constant_prior(0, 20));
  const LipschitzConstants L{0.1, 0.1, 0.1, 0.1, 0.2, 0.2};
  const BoundConfig c = default_bounds(L);
  EXPECT_NEAR(uniform_bound_f(vec2(1, 1), m, c), std::sqrt(beta(c) * 2.0) + gamma_f(c), 1e-12);
  EXPECT_NEAR(uniform_bound_g(vec2(1, 1), m, c), std::sqrt(beta(c) * 3.0) + gamma_g(c), 1e-12);
}

TEST(VarianceUpper, LimitsAndMonotonicity) {
  const Hyperparameters h{2.0, 3.0, 0.8, 1.2, 0.2};
  QualityConfig q;
  q.M = 2;
  q.u_bar_f = 0.3;
  q.u_low_g = 0.5;
  q.u_bar_g = 2.0;
  EXPECT_EQ(variance_upper_f(kInf, q, h), h.s_f2);
  EXPECT_EQ(variance_upper_g(kInf, q, h), h.s_g2);
  EXPECT_NEAR(variance_upper_f(0.0, q, h), h.s_f2 * (1.0 - h.s_f2 / (h.s_f2 + 0.09 * h.s_g2 + h.s_on2 / 2.0)), 1e-14);
  double prev_f = -1.0, prev_g = -1.0;
  for (double phi = 0.0; phi < 5.0; phi += 0.05) {
    const double vf = variance_upper_f(phi, q, h), vg = variance_upper_g(phi, q, h);
    EXPECT_GE(vf, prev_f);
    EXPECT_GE(vg, prev_g);
    EXPECT_LE(vf, h.s_f2);
    EXPECT_LE(vg, h.s_g2);
    prev_f = vf;
    prev_g = vg;
  }
}

TEST(VarianceUpper, FullInformationLimit) {
  QualityConfig q;
  q.M = 1000000;
  q.u_bar_f = 0.0;
  EXPECT_NEAR(variance_upper_f(0.0, q, {1.0, 1.0, 1.0, 1.0, 1e-9}), 0.0, 1e-12);
  q.u_low_g = 2.0;
  q.u_bar_g = 2.0;
  EXPECT_NEAR(variance_upper_g(0.0, q, {1e-12, 1.0, 1.0, 1.0, 1e-9}), 0.0, 1e-9);
}

TEST(VarianceUpper, NoLowerInputBoundGivesPriorVariance) {
  QualityConfig q;
  q.u_low_g = 0.0;
  q.u_bar_g = 3.0;
  EXPECT_EQ(variance_upper_g(0.1, q, {1.0, 2.5, 1.0, 1.0, 0.1}), 2.5);
}

TEST(VarianceUpper, BoundsPosteriorVarianceOnBenchmark) {
  const GPModel m = benchmark_model();
  const auto iq = input_quantiles(m.data());
  QualityConfig q;
  q.u_bar_f = iq.u_bar_f;
  q.u_low_g = iq.u_low_g;
  q.u_bar_g = iq.u_bar_g;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> U(-2.5, 2.5);
  for (int i = 0; i < 300; ++i) {
    const Vector x = vec2(U(rng), U(rng));
    const auto c = m.components(x);
    EXPECT_LE(c.var_f, variance_upper_f(m_fill_distance(x, m.data(), q.M, 0.0, q.u_bar_f), q, m.hyperparameters()) + 1e-9);
    EXPECT_LE(c.var_g, variance_upper_g(m_fill_distance(x, m.data(), q.M, q.u_low_g, q.u_bar_g), q, m.hyperparameters()) + 1e-9);
  }
}

TEST(Lipschitz, FlatPriorHasZeroConstants) {
  const GPModel m(TrainingSet(2, 0.1), {1, 1, 1, 1, 0.1}, constant_prior(0.0, 20.0));
  const LipschitzConstants L = estimate_lipschitz(m, Box::cube(2, 2.5), 21);
  EXPECT_EQ(L.mu_f, 0.0);
  EXPECT_EQ(L.mu_g, 0.0);
  EXPECT_EQ(L.var_f, 0.0);
  EXPECT_EQ(L.var_g, 0.0);
}

TEST(Lipschitz, MatchesAnalyticSlopeInOneDimension) {
  // One sample at 0: mu_f(x) = a s_f2 exp(-x^2 / 2) with max slope a s_f2 e^{-1/2} at |x| = 1.
  TrainingSet d(1, 1e-4);
  d.add(Vector::Zero(1), 0.0, 1.0);
  const Hyperparameters h{1.0, 1.0, 1.0, 1.0, 1e-4};
  const GPModel m(d, h, constant_prior(0, 1));
  const double a = 1.0 / (h.s_f2 + h.s_on2 + gram_jitter(h));
  const double analytic = a * h.s_f2 * std::exp(-0.5);
  Box box{Vector::Constant(1, -3.0), Vector::Constant(1, 3.0)};
  const LipschitzConstants L = estimate_lipschitz(m, box, 601);
  EXPECT_NEAR(L.mu_f, analytic, 0.05 * analytic);
  EXPECT_DOUBLE_EQ(L.f, 2.0 * L.mu_f);
  EXPECT_DOUBLE_EQ(L.g, 2.0 * L.mu_g);
}

TEST(Lipschitz, StableUnderGridRefinement) {
  const GPModel m = benchmark_model();
  const LipschitzConstants a = estimate_lipschitz(m, Box::cube(2, 2.5), 51);
  const LipschitzConstants b = estimate_lipschitz(m, Box::cube(2, 2.5), 101);
  for (auto [x, y] : {std::pair{a.mu_f, b.mu_f}, {a.mu_g, b.mu_g}, {a.var_f, b.var_f}, {a.var_g, b.var_g}})
    EXPECT_LT(std::abs(x - y), 0.1 * std::max(x, y));
}

TEST(Lipschitz, RejectsCoarseGrid) {
  const GPModel m(TrainingSet(2, 0.1), {1, 1, 1, 1, 0.1}, constant_prior(0.0, 20.0));
  EXPECT_THROW(estimate_lipschitz(m, Box::cube(2, 1.0), 1), ArgumentError);
}
