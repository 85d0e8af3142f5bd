#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace rhogap;
using testing_support::vec2;

namespace {

const TrainingSet& benchmark_data() {
  static const TrainingSet d = testing_support::small_benchmark_data(300, 4);
  return d;
}

GPModel benchmark_model() { return GPModel(benchmark_data(), {2.5, 1.0, 2.5, 1.6, 0.25}, constant_prior(0.0, 20.0)); }

BoundConfig bounds_with(LipschitzConstants L = {}) { return {1e-4, 1e-2, 5.0, 2, L}; }

SystemSpec exact_system() {
  SystemSpec s = benchmark_system();
  s.prior = benchmark_exact_prior();
  return s;
}

GPModel exact_model() { return GPModel(TrainingSet(2, 0.25), {1.0, 1.0, 1.0, 1.0, 0.25}, benchmark_exact_prior()); }

}  // namespace

TEST(FilteredState, DotProductWithLambda) {
  const ControllerConfig c;
  EXPECT_EQ(filtered_state(Vector::Zero(2), c), 0.0);
  EXPECT_EQ(filtered_state(vec2(1.0, 2.0), c), 3.0);
  EXPECT_THROW(filtered_state(Vector::Zero(3), c), ArgumentError);
}

TEST(ControllerConfig, RejectsNonHurwitzLambda) {
  ControllerConfig c;
  c.lambda = Vector::Constant(1, -1.0);
  EXPECT_THROW(c.validate(), ArgumentError);
  c.lambda = Vector::Ones(1);
  c.k_c = 0.0;
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Eta, SpotValues) {
  ControllerConfig c;
  EXPECT_NEAR(eta(c), 40.0 / 41.0, 1e-12);
  c.k_c = 1e12;
  EXPECT_NEAR(eta(c), 1.0, 1e-11);
  ControllerConfig c3;
  c3.k_c = 1.0;
  c3.lambda = Vector::Ones(2);
  EXPECT_NEAR(eta(c3), 0.5, 1e-15);
}

TEST(Alpha, KnownGIsZero) { EXPECT_EQ(alpha_value(0.0, 20.0, 7.0, 0.0), 0.0); }

TEST(Alpha, PriorClosedForm) {
  const Hyperparameters h{2.0, 3.0, 1.0, 1.0, 0.25};
  const GPModel m(TrainingSet(2, 0.25), h, constant_prior(0.0, 20.0));
  const BoundConfig bc = bounds_with({0.2, 0.3, 0.1, 0.4, 0.5, 0.6});
  const double expected = (std::sqrt(beta(bc)) * std::sqrt(h.s_g2) + gamma_g(bc)) / 20.0;
  EXPECT_NEAR(alpha(vec2(0.4, -1.0), m, bc), expected, 1e-14);
}

TEST(Alpha, RejectsNonPositiveMean) {
  EXPECT_THROW(alpha_value(0.1, -1.0, 7.0, 0.0), SignViolationError);
  EXPECT_THROW(alpha_value(0.1, 0.0, 7.0, 0.0), SignViolationError);
}

TEST(DecoupledInput, ZeroWhenMeanMatchesNu) { EXPECT_EQ(decoupled_input(1.7, 1.7, 20.0, 0.02), 0.0); }

TEST(DecoupledInput, SingularBelowThreshold) {
  EXPECT_THROW(decoupled_input(1.0, 0.0, 0.01, 0.02), SingularDecouplingError);
  EXPECT_THROW(decoupled_input(1.0, 0.0, -0.01, 0.02), SingularDecouplingError);
}

TEST(ControlLaw, MatchesIndependentReimplementation) {
  const GPModel m = benchmark_model();
  const ControllerConfig c;
  const auto s = testing_support::from_training_set(benchmark_data());
  const Hyperparameters& h = m.hyperparameters();
  for (const double t : {0.0, 0.3, 2.0}) {
    for (const Vector& x : {vec2(0.0, 0.0), vec2(0.5, 1.2), vec2(-1.0, 0.4)}) {
      const auto ref = oracle::components(s, testing_support::to_oracle(h), x, gram_jitter(h));
      const double mu_f = ref.mu_f, mu_g = 20.0 + ref.mu_g;
      const double e1 = x[0] - 2.0 * std::sin(t), e2 = x[1] - 2.0 * std::cos(t);
      const double r = e1 + e2;
      const double nu = -40.0 * r - e2 - 2.0 * std::sin(t);
      EXPECT_NEAR(control_law(x, t, m, c), (nu - mu_f) / mu_g, 1e-9);
    }
  }
}

TEST(UltimateBound, ZeroUncertaintyGivesZeroRadius) {
  const ControllerConfig c;
  const BoundConstants k{7.0, 0.0, 0.0, eta(c)};
  const PosteriorComponents pc{0.0, 20.0, 0.0, 0.0, 0.0};
  const auto s = ultimate_bound_from(0.0, vec2(0, 0), pc, k, c);
  EXPECT_TRUE(s.feasible);
  EXPECT_EQ(s.radius, 0.0);
}

TEST(UltimateBound, KnownGReduction) {
  const GPModel m = benchmark_model();
  const ControllerConfig c;
  const BoundConfig bc = bounds_with({0.3, 0.2, 0.5, 0.4, 1.0, 1.2});
  BoundConstants k = BoundConstants::from(bc, c);
  k.gamma_g = 0.0;
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> U(-1.7, 1.7), T(0.0, 30.0);
  for (int i = 0; i < 100; ++i) {
    const Vector x = vec2(U(rng), U(rng));
    auto pc = m.components(x);
    pc.var_g = 0.0;
    const auto s = ultimate_bound_from(T(rng), x, pc, k, c);
    ASSERT_TRUE(s.feasible);
    EXPECT_EQ(s.alpha, 0.0);
    EXPECT_NEAR(s.radius, (std::sqrt(beta(bc)) * std::sqrt(pc.var_f) + gamma_f(bc)) / c.k_c, 1e-12);
  }
}

TEST(UltimateBound, InfeasibleWhenAlphaReachesEta) {
  ControllerConfig c;
  c.k_c = 0.01;
  const BoundConstants k{7.0, 0.0, 0.0, eta(c)};
  const PosteriorComponents pc{0.0, 20.0, 0.1, 1.0, 0.0};
  const auto s = ultimate_bound_from(0.0, vec2(0, 0), pc, k, c);
  EXPECT_GE(s.alpha, k.eta);
  EXPECT_FALSE(s.feasible);
  EXPECT_TRUE(std::isnan(s.radius));
}

TEST(UltimateBound, FeasibleImpliesPositiveEffectiveGain) {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> logu(-3.0, 3.0), U(0.0, 1.0);
  int feasible = 0;
  for (int i = 0; i < 2000; ++i) {
    ControllerConfig c;
    c.k_c = std::pow(10.0, logu(rng));
    c.lambda = Vector::Constant(1, std::pow(10.0, logu(rng)));
    const BoundConstants k{std::pow(10.0, logu(rng)), U(rng), U(rng), eta(c)};
    const PosteriorComponents pc{U(rng), std::pow(10.0, logu(rng)), U(rng), U(rng), 0.0};
    const auto s = ultimate_bound_from(U(rng), vec2(0, 0), pc, k, c);
    if (s.alpha < k.eta) {
      ++feasible;
      EXPECT_TRUE(s.feasible);
      EXPECT_GT(s.k_tilde, 0.0);
      EXPECT_GE(s.radius, 0.0);
    }
  }
  EXPECT_GT(feasible, 100);
}

TEST(UltimateBound, RadiusNonincreasingInGain) {
  const GPModel m = benchmark_model();
  const BoundConfig bc = bounds_with({0.3, 0.2, 0.5, 0.4, 1.0, 1.2});
  const Matrix grid = ball_grid(2, 2.5, 25);
  const double gains[] = {10.0, 20.0, 40.0, 80.0, 160.0};
  for (Eigen::Index j = 0; j < grid.cols(); ++j) {
    const Vector x = grid.col(j);
    double prev_radius = kInf, prev_eta = 0.0, prev_kt = -kInf;
    for (const double kc : gains) {
      ControllerConfig c;
      c.k_c = kc;
      const auto s = ultimate_bound(x, 0.5, m, bc, c);
      const double e = eta(c);
      EXPECT_GT(e, prev_eta);
      EXPECT_GT(s.k_tilde, prev_kt);
      if (s.feasible) {
        EXPECT_LE(s.radius, prev_radius * (1.0 + 1e-12));
      }
      prev_radius = s.feasible ? s.radius : kInf;
      prev_eta = e;
      prev_kt = s.k_tilde;
    }
  }
}

TEST(VdotComponents, ZeroCases) {
  const auto z = vdot_from(0.0, 2.0, 1.0, 1.0, 7.0, 0.1, 0.1, 40.0);
  EXPECT_EQ(z.nominal, 0.0);
  EXPECT_EQ(z.sigma_f, 0.0);
  EXPECT_EQ(z.sigma_g, 0.0);
  const auto u0 = vdot_from(0.5, 0.0, 1.0, 1.0, 7.0, 0.1, 0.1, 40.0);
  EXPECT_EQ(u0.sigma_g, 0.0);
  EXPECT_DOUBLE_EQ(u0.nominal, -10.0);
  EXPECT_DOUBLE_EQ(u0.sigma_f, 0.5 * 7.1);
}

TEST(ClosedLoop, ExactModelsTrackPerfectly) {
  const ControllerConfig c;
  SimConfig sc;
  sc.x0 = c.reference.state(0.0);
  sc.update = ControlUpdate::PerStage;
  sc.record_stride = 10;
  const SimResult res = simulate_closed_loop(exact_system(), exact_model(), c, bounds_with(), sc);
  double worst = 0.0;
  for (const auto& s : res.samples) worst = std::max(worst, tracking_error(s.x, s.t, c).norm());
  EXPECT_LE(worst, 1e-6);
  EXPECT_NEAR(res.samples.back().t, 30.0, 1e-9);
}

TEST(ClosedLoop, ExactModelsGiveExponentialDecay) {
  const ControllerConfig c;
  SimConfig sc;
  sc.horizon = 0.3;
  sc.x0 = c.reference.state(0.0) + vec2(0.0, 0.5);
  sc.update = ControlUpdate::PerStage;
  sc.record_stride = 1;
  const SimResult res = simulate_closed_loop(exact_system(), exact_model(), c, bounds_with(), sc);
  // Least-squares slope of log|r| against t.
  double st = 0, sy = 0, stt = 0, sty = 0, n = 0;
  for (const auto& s : res.samples) {
    const double y = std::log(std::abs(s.r));
    st += s.t;
    sy += y;
    stt += s.t * s.t;
    sty += s.t * y;
    ++n;
  }
  const double slope = (n * sty - st * sy) / (n * stt - st * st);
  EXPECT_NEAR(slope, -c.k_c, 0.01 * c.k_c);
  EXPECT_NEAR(res.samples.front().r, 0.5, 1e-15);
}

TEST(ClosedLoop, LyapunovBoundDominatesFiniteDifference) {
  const GPModel m = benchmark_model();
  const ControllerConfig c;
  const BoundConfig bc = bounds_with(estimate_lipschitz(m, Box::cube(2, 2.5), 51));
  SimConfig sc;
  sc.horizon = 10.0;
  sc.record_stride = 1;
  sc.x0 = vec2(0.0, 0.0);
  const SimResult res = simulate_closed_loop(benchmark_system(), m, c, bc, sc);
  const auto V = [&](std::size_t i) { return 0.5 * res.samples[i].r * res.samples[i].r; };
  int total = 0, ok = 0;
  for (std::size_t i = 10; i + 1 < res.samples.size(); i += 10) {
    const auto& s = res.samples[i];
    const double fd = (V(i + 1) - V(i - 1)) / (2.0 * res.dt);
    const auto vd = vdot_components(s.x, tracking_error(s.x, s.t, c), s.u, m, bc, c);
    ++total;
    if (fd <= vd.nominal + vd.sigma_f + vd.sigma_g) ++ok;
  }
  EXPECT_GE(total, 999);
  EXPECT_GE(ok, static_cast<int>(std::ceil(0.99 * total)));
}
