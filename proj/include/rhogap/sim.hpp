#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "rhogap/control.hpp"
#include "rhogap/errors.hpp"
#include "rhogap/gp.hpp"
#include "rhogap/parallel.hpp"
#include "rhogap/types.hpp"

namespace rhogap {

// Plant x_1' = x_2, ..., x_d' = f(x) + g(x) u with its prior models.
struct SystemSpec {
  std::function<double(const Vector&)> f_true;
  std::function<double(const Vector&)> g_true;
  PriorMean prior;
  double domain_radius = 2.5;
  int d_x = 2;
};

namespace benchmark {

inline double f(const Vector& x) { return 1.0 - std::sin(x[0]) + 1.0 / (1.0 + std::exp(-x[1])); }
inline double g(const Vector& x) { return 20.0 * (1.0 + 0.5 * std::sin(x[1] / 4.0)); }

}  // namespace benchmark

// Prior equal to the true benchmark functions (for exact-model checks).
inline PriorMean benchmark_exact_prior() { return function_prior("benchmark_exact", benchmark::f, benchmark::g); }

inline SystemSpec benchmark_system(double f_hat = 0.0, double g_hat = 20.0, double domain_radius = 2.5) {
  return {benchmark::f, benchmark::g, constant_prior(f_hat, g_hat), domain_radius, 2};
}

// Resolves a persisted prior identifier.
inline PriorMean resolve_prior(const std::string& id, double f_value, double g_value) {
  if (id == "constant") return constant_prior(f_value, g_value);
  if (id == "benchmark_exact") return benchmark_exact_prior();
  throw ConfigError("unknown prior model '" + id + "'");
}

inline Vector dynamics(const Vector& x, double u, const SystemSpec& spec) {
  const Eigen::Index d = x.size();
  Vector dx(d);
  dx.head(d - 1) = x.tail(d - 1);
  dx[d - 1] = spec.f_true(x) + spec.g_true(x) * u;
  return dx;
}

// Classical fourth-order Runge-Kutta step of x' = field(t, x).
template <class Field>
Vector rk4_step(const Vector& x, double t, double dt, Field&& field) {
  if (!(dt > 0.0)) throw ArgumentError("rk4_step: dt must be > 0");
  const Vector k1 = field(t, x);
  const Vector k2 = field(t + 0.5 * dt, Vector(x + 0.5 * dt * k1));
  const Vector k3 = field(t + 0.5 * dt, Vector(x + 0.5 * dt * k2));
  const Vector k4 = field(t + dt, Vector(x + dt * k3));
  Vector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite())
    throw DivergenceError("rk4_step: non-finite state at t = " + std::to_string(t + dt));
  return next;
}

struct DataGenConfig {
  int n = 1000;
  double s_on = 0.5;
  double gain = 100.0;
  Vector lambda = Vector::Ones(1);
  double horizon = 30.0;
  double dt = 1e-3;
  double reference_amplitude = 2.0;
  std::uint64_t seed = 1;
};

// Tracks x_d(t) = A sin t with a high-gain linearizing controller built on the
// prior models and records (x, u, y) at n uniformly spaced times in
// [0, horizon). Targets are the residual Delta(x, u) plus N(0, s_on^2) noise.
inline TrainingSet generate_training_data(const SystemSpec& spec, const DataGenConfig& cfg) {
  if (cfg.n < 1) throw ArgumentError("generate_training_data: n must be >= 1");
  if (!(cfg.s_on >= 0.0)) throw ArgumentError("generate_training_data: s_on must be >= 0");
  if (!(cfg.dt > 0.0) || !(cfg.horizon > 0.0)) throw ArgumentError("generate_training_data: dt and horizon must be > 0");

  ControllerConfig ctrl;
  ctrl.k_c = cfg.gain;
  ctrl.lambda = cfg.lambda;
  ctrl.reference = sinusoid_reference(cfg.reference_amplitude, spec.d_x);
  ctrl.mu_g_min = 0.0;
  ctrl.validate();

  boost::random::mt19937_64 rng(cfg.seed);
  boost::random::normal_distribution<double> noise(0.0, cfg.s_on > 0.0 ? cfg.s_on : 1.0);

  TrainingSet data(static_cast<std::size_t>(spec.d_x), cfg.s_on * cfg.s_on);
  const double sample_period = cfg.horizon / cfg.n;
  Vector x = Vector::Zero(spec.d_x);
  long step = 0;
  for (int n = 0; n < cfg.n; ++n) {
    const long target = std::lround(n * sample_period / cfg.dt);
    for (; step <= target; ++step) {
      const double t = step * cfg.dt;
      const double u = decoupled_input(linearized_input(tracking_error(x, t, ctrl), t, ctrl), spec.prior.f(x),
                                       spec.prior.g(x), 0.0);
      if (step == target) {
        const double residual = spec.f_true(x) - spec.prior.f(x) + (spec.g_true(x) - spec.prior.g(x)) * u;
        data.add(x, u, residual + (cfg.s_on > 0.0 ? noise(rng) : 0.0));
      }
      x = rk4_step(x, t, cfg.dt, [&](double, const Vector& s) { return dynamics(s, u, spec); });
      if (x.norm() > 3.0 * spec.domain_radius)
        throw DataGenerationError("data-generation trajectory left 3x the analysis domain at t = " +
                                  std::to_string(t + cfg.dt));
    }
  }
  return data;
}

enum class ControlUpdate {
  ZeroOrderHold,  // control computed once per step and held
  PerStage        // control re-evaluated at every Runge-Kutta stage
};

struct SimConfig {
  double horizon = 30.0;
  double dt = 1e-3;
  Vector x0 = Vector::Zero(2);
  int record_stride = 10;
  ControlUpdate update = ControlUpdate::ZeroOrderHold;
};

struct TrajectorySample {
  double t = 0.0;
  Vector x;
  double u = 0.0;
  double r = 0.0;
  double err_lambda = 0.0;  // sqrt(e^T Lambda e) = |r| with Lambda = [lambda; 1][lambda; 1]^T
  UltimateBoundSample bound;
};

struct SimResult {
  std::vector<TrajectorySample> samples;
  double dt = 0.0;
  int record_stride = 1;
};

// Closed loop with the GP feedback-linearizing controller. The ultimate bound
// is evaluated at the recorded states after integration.
inline SimResult simulate_closed_loop(const SystemSpec& spec, const GPModel& model, const ControllerConfig& ctrl,
                                      const BoundConfig& bc, const SimConfig& sc) {
  ctrl.validate();
  if (!(sc.dt > 0.0) || !(sc.horizon > 0.0)) throw ArgumentError("simulate: dt and horizon must be > 0");
  if (sc.record_stride < 1) throw ArgumentError("simulate: record_stride must be >= 1");
  if (sc.x0.size() != spec.d_x) throw ArgumentError("simulate: x0 dimension mismatch");

  SimResult res;
  res.dt = sc.dt;
  res.record_stride = sc.record_stride;
  const long steps = std::lround(sc.horizon / sc.dt);
  Vector x = sc.x0;
  for (long k = 0; k <= steps; ++k) {
    const double t = k * sc.dt;
    const double u = control_law(x, t, model, ctrl);
    if (k % sc.record_stride == 0 || k == steps) {
      TrajectorySample s;
      s.t = t;
      s.x = x;
      s.u = u;
      s.r = filtered_state(tracking_error(x, t, ctrl), ctrl);
      s.err_lambda = std::abs(s.r);
      res.samples.push_back(std::move(s));
    }
    if (k == steps) break;
    if (sc.update == ControlUpdate::ZeroOrderHold) {
      x = rk4_step(x, t, sc.dt, [&](double, const Vector& s) { return dynamics(s, u, spec); });
    } else {
      x = rk4_step(x, t, sc.dt,
                   [&](double tau, const Vector& s) { return dynamics(s, control_law(s, tau, model, ctrl), spec); });
    }
  }

  Matrix Q(spec.d_x, static_cast<Eigen::Index>(res.samples.size()));
  for (std::size_t i = 0; i < res.samples.size(); ++i) Q.col(static_cast<Eigen::Index>(i)) = res.samples[i].x;
  const PosteriorBatch pb = model.batch(Q);
  const BoundConstants kb = BoundConstants::from(bc, ctrl);
  parallel_for(res.samples.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto j = static_cast<Eigen::Index>(i);
      const PosteriorComponents pc{pb.mu_f[j], pb.mu_g[j], pb.var_f[j], pb.var_g[j], 0.0};
      res.samples[i].bound = ultimate_bound_from(res.samples[i].t, res.samples[i].x, pc, kb, ctrl);
    }
  });
  return res;
}

}  // namespace rhogap
