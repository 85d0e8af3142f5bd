#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "rhogap/bounds.hpp"
#include "rhogap/control.hpp"
#include "rhogap/errors.hpp"
#include "rhogap/gp.hpp"
#include "rhogap/lipschitz.hpp"
#include "rhogap/parallel.hpp"
#include "rhogap/types.hpp"

namespace rhogap {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Radius of the smallest ball around x holding M samples with
// u_low <= |u| <= u_high. +inf when fewer than M samples qualify.
inline double m_fill_distance(const Vector& x, const TrainingSet& data, int M, double u_low, double u_high) {
  if (M < 1) throw ArgumentError("m_fill_distance: M must be >= 1");
  if (!data.empty() && static_cast<std::size_t>(x.size()) != data.dim())
    throw ArgumentError("m_fill_distance: dimension mismatch");
  std::vector<double> d2;
  d2.reserve(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double a = std::abs(data.input(n));
    if (a >= u_low && a <= u_high) d2.push_back((data.state(n) - x).squaredNorm());
  }
  if (d2.size() < static_cast<std::size_t>(M)) return kInf;
  auto nth = d2.begin() + (M - 1);
  std::nth_element(d2.begin(), nth, d2.end());
  return std::sqrt(*nth);
}

// Nearest-rank percentile: the ceil(p N)-th smallest value (1-based).
inline double nearest_rank(std::vector<double> sorted_values, double p) {
  if (sorted_values.empty()) throw ArgumentError("nearest_rank: empty sample");
  std::sort(sorted_values.begin(), sorted_values.end());
  const auto n = static_cast<double>(sorted_values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted_values.size());
  return sorted_values[rank - 1];
}

struct InputQuantiles {
  double u_bar_f = 0.0;
  double u_low_g = 0.0;
  double u_bar_g = 0.0;
};

// u_bar_f: 10th percentile of |u|; u_low_g: 90th percentile; u_bar_g: max.
inline InputQuantiles input_quantiles(const TrainingSet& data, double f_fraction = 0.1, double g_fraction = 0.9) {
  if (data.empty()) throw ArgumentError("input_quantiles: empty data set");
  std::vector<double> a(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) a[n] = std::abs(data.input(n));
  return {nearest_rank(a, f_fraction), nearest_rank(a, g_fraction), *std::max_element(a.begin(), a.end())};
}

inline double theta_f(const QualityConfig& q, const Hyperparameters& h) {
  if (!(h.s_f2 > 0.0)) throw DomainError("theta_f: s_f2 must be > 0");
  const double M = q.M;
  return -h.l_f * h.l_f * std::log((M * h.s_f2 + M * h.s_g2 * q.u_bar_f * q.u_bar_f + h.s_on2) / (M * h.s_f2));
}

inline double theta_g(const QualityConfig& q, const Hyperparameters& h) {
  if (!(q.u_low_g > 0.0))
    throw DomainError("theta_g: no informative lower input bound; g-density unverifiable");
  if (!(h.s_g2 > 0.0)) throw DomainError("theta_g: s_g2 must be > 0");
  const double M = q.M;
  return -h.l_g * h.l_g *
         std::log((M * h.s_f2 + M * q.u_bar_g * q.u_bar_g * h.s_g2 + h.s_on2) / (M * h.s_g2 * q.u_low_g * q.u_low_g));
}

namespace detail {

inline double required_fill2(double xi, double slack, double prior_bound2, double l) {
  if (!(xi > slack)) throw SpecInfeasibleError("performance specification not above the gamma offset");
  if (prior_bound2 == 0.0) return kInf;
  const double ratio = (xi - slack) * (xi - slack) / prior_bound2;
  if (ratio >= 1.0) return kInf;
  return -l * l * std::log1p(-ratio);
}

}  // namespace detail

// Squared fill-distance threshold for the f-part. dvde is dV/de_{d_x}.
inline double phi_bar2_f(double xi_f, double dvde, double beta_value, double gamma_f_value, const Hyperparameters& h) {
  const double a = std::abs(dvde);
  return detail::required_fill2(xi_f, gamma_f_value * a, beta_value * h.s_f2 * a * a, h.l_f);
}

inline double phi_bar2_g(double xi_g, double dvde, double control_input, double beta_value, double gamma_g_value,
                         const Hyperparameters& h) {
  const double a = std::abs(dvde) * std::abs(control_input);
  return detail::required_fill2(xi_g, gamma_g_value * a, beta_value * h.s_g2 * a * a, h.l_g);
}

// xi = chi * k_c * r^2, the fraction of the nominal decrease magnitude.
inline std::pair<double, double> performance_specs(double r, const ControllerConfig& ctrl, const QualityConfig& q) {
  const double nominal = ctrl.k_c * r * r;
  return {q.chi_f * nominal, q.chi_g * nominal};
}

enum class RhoVariant {
  AsPrinted,              // rho = phi - phibar^2
  DimensionallyConsistent // rho = phi^2 - (phibar^2 + theta)
};

struct RhoGapSample {
  Vector x;
  double phi_f = 0.0;
  double phi_g = 0.0;
  double phibar2_f = 0.0;  // NaN when the spec is infeasible at this state
  double phibar2_g = 0.0;
  double theta_f = 0.0;
  double theta_g = 0.0;
  double rho_f = 0.0;
  double rho_g = 0.0;
  bool spec_feasible_f = true;
  bool spec_feasible_g = true;
  bool feasible_f = false;  // phi_f^2 <= phibar2_f + theta_f
  bool feasible_g = false;
};

namespace detail {

inline double rho_value(double phi, double phibar2, double theta, bool spec_ok, RhoVariant v) {
  if (!spec_ok || std::isinf(phi)) return kInf;
  if (std::isinf(phibar2)) return -kInf;
  return v == RhoVariant::AsPrinted ? phi - phibar2 : phi * phi - (phibar2 + theta);
}

inline bool density_condition(double phi, double phibar2, double theta, bool spec_ok) {
  if (!spec_ok) return false;
  if (std::isinf(phibar2)) return true;  // the prior already meets the specification
  return phi * phi <= phibar2 + theta;
}

}  // namespace detail

// rho-gaps at state x with tracking error e and control input pi(x).
inline RhoGapSample rho_gaps(const Vector& x, const Vector& e, double control_input, const GPModel& m,
                             const BoundConfig& bc, const QualityConfig& q, const ControllerConfig& ctrl,
                             RhoVariant variant = RhoVariant::AsPrinted) {
  const Hyperparameters& h = m.hyperparameters();
  const double b = beta(bc);
  const double r = filtered_state(e, ctrl);
  const auto [xi_f, xi_g] = performance_specs(r, ctrl, q);

  RhoGapSample s;
  s.x = x;
  s.phi_f = m_fill_distance(x, m.data(), q.M, 0.0, q.u_bar_f);
  s.phi_g = m_fill_distance(x, m.data(), q.M, q.u_low_g, q.u_bar_g);
  try {
    s.theta_f = theta_f(q, h);
  } catch (const DomainError&) {
    s.theta_f = -kInf;
  }
  try {
    s.theta_g = theta_g(q, h);
  } catch (const DomainError&) {
    s.theta_g = -kInf;
  }
  try {
    s.phibar2_f = phi_bar2_f(xi_f, r, b, gamma_f(bc), h);
  } catch (const SpecInfeasibleError&) {
    s.spec_feasible_f = false;
    s.phibar2_f = std::numeric_limits<double>::quiet_NaN();
  }
  try {
    if (!std::isfinite(control_input)) throw SpecInfeasibleError("control input undefined");
    s.phibar2_g = phi_bar2_g(xi_g, r, control_input, b, gamma_g(bc), h);
  } catch (const SpecInfeasibleError&) {
    s.spec_feasible_g = false;
    s.phibar2_g = std::numeric_limits<double>::quiet_NaN();
  }
  s.rho_f = detail::rho_value(s.phi_f, s.phibar2_f, s.theta_f, s.spec_feasible_f, variant);
  s.rho_g = detail::rho_value(s.phi_g, s.phibar2_g, s.theta_g, s.spec_feasible_g, variant);
  s.feasible_f = detail::density_condition(s.phi_f, s.phibar2_f, s.theta_f, s.spec_feasible_f);
  s.feasible_g = detail::density_condition(s.phi_g, s.phibar2_g, s.theta_g, s.spec_feasible_g);
  return s;
}

// Control input at (x, t), NaN where mu_g is not invertible.
inline double control_or_nan(const Vector& x, double t, const GPModel& m, const ControllerConfig& ctrl) {
  try {
    return control_law(x, t, m, ctrl);
  } catch (const SingularDecouplingError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

// rho-gaps for a snapshot of the reference at time t: e = x - x_d(t), pi from the GP controller.
inline RhoGapSample rho_gaps_at(const Vector& x, double t, const GPModel& m, const BoundConfig& bc,
                                const QualityConfig& q, const ControllerConfig& ctrl,
                                RhoVariant variant = RhoVariant::AsPrinted) {
  return rho_gaps(x, tracking_error(x, t, ctrl), control_or_nan(x, t, m, ctrl), m, bc, q, ctrl, variant);
}

// One sample per column of `points`, in column order.
inline std::vector<RhoGapSample> rho_field(const Matrix& points, double t, const GPModel& m, const BoundConfig& bc,
                                           const QualityConfig& q, const ControllerConfig& ctrl,
                                           RhoVariant variant = RhoVariant::AsPrinted) {
  if (points.cols() == 0) throw ArgumentError("rho_field: empty grid");
  std::vector<RhoGapSample> out(static_cast<std::size_t>(points.cols()));
  parallel_for(out.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k)
      out[k] = rho_gaps_at(points.col(static_cast<Eigen::Index>(k)), t, m, bc, q, ctrl, variant);
  });
  return out;
}

// Lattice points of the box [-radius, radius]^d that lie in the ball |x| <= radius, row-major.
inline Matrix ball_grid(int dim, double radius, int resolution) {
  if (resolution < 1) throw ArgumentError("ball_grid: resolution must be >= 1");
  if (resolution == 1) return Matrix::Zero(dim, 1);
  const Matrix P = lattice(Box::cube(dim, radius), resolution);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < P.cols(); ++k)
    if (P.col(k).norm() <= radius * (1.0 + 1e-12)) keep.push_back(k);
  Matrix out(dim, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = P.col(keep[i]);
  return out;
}

}  // namespace rhogap
