#pragma once

#include <cmath>
#include <limits>

#include "rhogap/errors.hpp"
#include "rhogap/gp.hpp"
#include "rhogap/types.hpp"

namespace rhogap {

// Constants of the uniform error bound: grid constant tau, confidence delta,
// domain diameter r0, state dimension and the Lipschitz constants.
struct BoundConfig {
  double tau = 1e-4;
  double delta = 1e-2;
  double r0 = 5.0;
  int d_x = 2;
  LipschitzConstants lipschitz;

  void validate() const {
    if (!(tau > 0.0)) throw ArgumentError("tau must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("delta must lie in (0, 1)");
    if (!(r0 > 0.0)) throw ArgumentError("r0 must be > 0");
    if (d_x < 1) throw ArgumentError("d_x must be >= 1");
    const auto& L = lipschitz;
    if (L.mu_f < 0 || L.mu_g < 0 || L.var_f < 0 || L.var_g < 0 || L.f < 0 || L.g < 0)
      throw ArgumentError("Lipschitz constants must be >= 0");
  }
};

// Diameter of the ball {|x| <= radius}.
inline double ball_diameter(double radius) { return 2.0 * radius; }

inline double beta(const BoundConfig& c) {
  c.validate();
  return 2.0 * c.d_x * std::log(1.0 + c.r0 / c.tau) - 2.0 * std::log(c.delta);
}

inline double gamma_f(const BoundConfig& c) {
  const double b = beta(c);
  return (c.lipschitz.mu_f + c.lipschitz.f) * c.tau + std::sqrt(b * c.lipschitz.var_f * c.tau);
}

inline double gamma_g(const BoundConfig& c) {
  const double b = beta(c);
  return (c.lipschitz.mu_g + c.lipschitz.g) * c.tau + std::sqrt(b * c.lipschitz.var_g * c.tau);
}

// Radius of the high-probability tube |f(x) - mu_f(x)| <= sqrt(beta) sigma_f(x) + gamma_f.
inline double uniform_bound_f(const Vector& x, const GPModel& m, const BoundConfig& c) {
  return std::sqrt(beta(c)) * std::sqrt(m.posterior_f(x).variance) + gamma_f(c);
}

inline double uniform_bound_g(const Vector& x, const GPModel& m, const BoundConfig& c) {
  return std::sqrt(beta(c)) * std::sqrt(m.posterior_g(x).variance) + gamma_g(c);
}

// Upper bound on sigma_f^2(x) from the M nearest samples with |u| <= u_bar_f
// within fill distance phi; lambda_max of their Gram matrix is bounded by
// the Gershgorin row sum M (s_f2 + u_bar_f^2 s_g2).
inline double variance_upper_f(double phi, const QualityConfig& q, const Hyperparameters& h) {
  if (!(phi >= 0.0)) throw ArgumentError("variance_upper_f: phi must be >= 0");
  if (q.M < 1) throw ArgumentError("variance_upper_f: M must be >= 1");
  if (std::isinf(phi) || h.s_f2 == 0.0) return h.s_f2;
  const double denom = h.s_f2 + q.u_bar_f * q.u_bar_f * h.s_g2 + h.s_on2 / q.M;
  return h.s_f2 - h.s_f2 * h.s_f2 * std::exp(-phi * phi / (h.l_f * h.l_f)) / denom;
}

// g analog: samples with u_low_g <= |u| <= u_bar_g; the numerator carries u_low_g^2.
inline double variance_upper_g(double phi, const QualityConfig& q, const Hyperparameters& h) {
  if (!(phi >= 0.0)) throw ArgumentError("variance_upper_g: phi must be >= 0");
  if (q.M < 1) throw ArgumentError("variance_upper_g: M must be >= 1");
  if (std::isinf(phi) || h.s_g2 == 0.0) return h.s_g2;
  const double denom = h.s_f2 + q.u_bar_g * q.u_bar_g * h.s_g2 + h.s_on2 / q.M;
  return h.s_g2 - q.u_low_g * q.u_low_g * h.s_g2 * h.s_g2 * std::exp(-phi * phi / (h.l_g * h.l_g)) / denom;
}

}  // namespace rhogap
