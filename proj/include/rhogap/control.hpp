#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "rhogap/bounds.hpp"
#include "rhogap/errors.hpp"
#include "rhogap/gp.hpp"
#include "rhogap/types.hpp"

namespace rhogap {

// Reference trajectory: state(t) = [x_d, x_d', ..., x_d^(d-1)] and the
// d-th derivative that enters the linearized input.
struct Reference {
  std::function<Vector(double)> state;
  std::function<double(double)> top_derivative;
};

// x_d(t) = amplitude * sin(t) with analytic derivatives.
inline Reference sinusoid_reference(double amplitude, int d_x) {
  const auto deriv = [amplitude](double t, int k) { return amplitude * std::sin(t + k * std::numbers::pi / 2.0); };
  return {[=](double t) {
            Vector s(d_x);
            for (int k = 0; k < d_x; ++k) s[k] = deriv(t, k);
            return s;
          },
          [=](double t) { return deriv(t, d_x); }};
}

struct ControllerConfig {
  double k_c = 40.0;
  Vector lambda = Vector::Ones(1);
  Reference reference = sinusoid_reference(2.0, 2);
  double mu_g_min = 0.02;

  [[nodiscard]] int d_x() const { return static_cast<int>(lambda.size()) + 1; }

  // Roots of s^(d-1) + lambda_{d-1} s^(d-2) + ... + lambda_1.
  [[nodiscard]] bool hurwitz() const {
    const Eigen::Index n = lambda.size();
    if (n == 0) return true;
    Matrix C = Matrix::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) C(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) C(i, n - 1) = -lambda[i];
    Eigen::EigenSolver<Matrix> es(C, false);
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(es.eigenvalues()[i].real() < 0.0)) return false;
    return true;
  }

  void validate() const {
    if (!(k_c > 0.0)) throw ArgumentError("k_c must be > 0");
    if (lambda.size() < 1) throw ArgumentError("lambda needs d_x - 1 >= 1 coefficients");
    if (!hurwitz()) throw ArgumentError("lambda coefficients are not Hurwitz");
    if (!reference.state || !reference.top_derivative) throw ArgumentError("reference trajectory not set");
    if (!(mu_g_min >= 0.0)) throw ArgumentError("mu_g_min must be >= 0");
  }
};

// r = [lambda^T 1] e
inline double filtered_state(const Vector& e, const ControllerConfig& cfg) {
  if (e.size() != cfg.d_x()) throw ArgumentError("filtered_state: error dimension mismatch");
  return cfg.lambda.dot(e.head(cfg.lambda.size())) + e[e.size() - 1];
}

inline Vector tracking_error(const Vector& x, double t, const ControllerConfig& cfg) {
  return x - cfg.reference.state(t);
}

// nu = -k_c r - lambda^T e_{2:d} + d^d x_d / dt^d
inline double linearized_input(const Vector& e, double t, const ControllerConfig& cfg) {
  const double r = filtered_state(e, cfg);
  return -cfg.k_c * r - cfg.lambda.dot(e.tail(cfg.lambda.size())) + cfg.reference.top_derivative(t);
}

inline double decoupled_input(double nu, double mu_f, double mu_g, double mu_g_min) {
  if (!(std::abs(mu_g) > mu_g_min))
    throw SingularDecouplingError("|mu_g| = " + std::to_string(std::abs(mu_g)) + " is below the invertibility threshold");
  return (nu - mu_f) / mu_g;
}

// pi(x) = mu_g^-1(x) (nu - mu_f(x))
inline double control_law(const Vector& x, double t, const GPModel& m, const ControllerConfig& cfg) {
  const auto [mu_f, mu_g] = m.means(x);
  return decoupled_input(linearized_input(tracking_error(x, t, cfg), t, cfg), mu_f, mu_g, cfg.mu_g_min);
}

inline double eta(const ControllerConfig& cfg) {
  cfg.validate();
  const Vector& l = cfg.lambda;
  const Eigen::Index n = l.size();
  double v = cfg.k_c / (cfg.k_c + l[n - 1]);
  for (Eigen::Index i = 1; i < n; ++i) v = std::min(v, cfg.k_c * l[i] / (cfg.k_c * l[i] + l[i - 1]));
  return v;
}

inline double alpha_value(double sigma_g, double mu_g, double sqrt_beta, double gamma_g) {
  if (!(mu_g > 0.0)) throw SignViolationError("mu_g(x) must be positive, got " + std::to_string(mu_g));
  return (sqrt_beta * sigma_g + gamma_g) / mu_g;
}

inline double alpha(const Vector& x, const GPModel& m, const BoundConfig& c) {
  const auto pc = m.components(x);
  return alpha_value(std::sqrt(pc.var_g), pc.mu_g, std::sqrt(beta(c)), gamma_g(c));
}

struct UltimateBoundSample {
  double t = 0.0;
  Vector x;
  double radius = std::numeric_limits<double>::quiet_NaN();  // bound on sqrt(e^T Lambda e)
  double alpha = 0.0;
  double k_tilde = 0.0;
  double c_val = 0.0;
  bool feasible = false;
};

// Precomputed bound constants shared by many evaluations.
struct BoundConstants {
  double sqrt_beta = 0.0;
  double gamma_f = 0.0;
  double gamma_g = 0.0;
  double eta = 0.0;

  static BoundConstants from(const BoundConfig& bc, const ControllerConfig& cc) {
    return {std::sqrt(rhogap::beta(bc)), rhogap::gamma_f(bc), rhogap::gamma_g(bc), rhogap::eta(cc)};
  }
};

// Ultimate bound from posterior components at x; infeasible when alpha >= eta.
inline UltimateBoundSample ultimate_bound_from(double t, const Vector& x, const PosteriorComponents& pc,
                                               const BoundConstants& k, const ControllerConfig& cc) {
  UltimateBoundSample s;
  s.t = t;
  s.x = x;
  s.alpha = alpha_value(std::sqrt(pc.var_g), pc.mu_g, k.sqrt_beta, k.gamma_g);
  s.k_tilde = cc.k_c * (1.0 - s.alpha / k.eta);
  s.c_val = std::abs(cc.reference.top_derivative(t) - pc.mu_f);
  s.feasible = s.alpha < k.eta;
  if (s.feasible) s.radius = (k.sqrt_beta * std::sqrt(pc.var_f) + k.gamma_f + s.alpha * s.c_val) / s.k_tilde;
  return s;
}

inline UltimateBoundSample ultimate_bound(const Vector& x, double t, const GPModel& m, const BoundConfig& bc,
                                          const ControllerConfig& cc) {
  return ultimate_bound_from(t, x, m.components(x), BoundConstants::from(bc, cc), cc);
}

// Components of the Lyapunov derivative bound for V(r) = r^2 / 2.
struct VdotComponents {
  double nominal = 0.0;
  double sigma_f = 0.0;
  double sigma_g = 0.0;
};

inline VdotComponents vdot_from(double r, double u, double var_f, double var_g, double sqrt_beta, double gf,
                                double gg, double k_c) {
  return {-k_c * r * r, std::abs(r) * (sqrt_beta * std::sqrt(var_f) + gf),
          std::abs(r) * (sqrt_beta * std::sqrt(var_g) + gg) * std::abs(u)};
}

inline VdotComponents vdot_components(const Vector& x, const Vector& e, double u, const GPModel& m,
                                      const BoundConfig& bc, const ControllerConfig& cc) {
  const auto pc = m.components(x);
  return vdot_from(filtered_state(e, cc), u, pc.var_f, pc.var_g, std::sqrt(beta(bc)), gamma_f(bc), gamma_g(bc),
                   cc.k_c);
}

}  // namespace rhogap
