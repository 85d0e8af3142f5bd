#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rhogap/errors.hpp"

namespace rhogap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A training/test input z = [x; u] of the single-input control-affine model.
struct InputPoint {
  Vector x;
  double u = 0.0;
};

// Kernel and noise parameters of the composite kernel. Variances are stored
// squared (s_f2 = s_f^2), length scales are not.
struct Hyperparameters {
  double s_f2 = 1.0;
  double s_g2 = 1.0;
  double l_f = 1.0;
  double l_g = 1.0;
  double s_on2 = 0.25;

  void validate() const {
    if (!(s_f2 >= 0.0) || !(s_g2 >= 0.0)) throw ArgumentError("signal variances must be >= 0");
    if (!(l_f > 0.0) || !(l_g > 0.0)) throw ArgumentError("length scales must be > 0");
    if (!(s_on2 > 0.0)) throw ArgumentError("noise variance must be > 0");
    if (!std::isfinite(s_f2) || !std::isfinite(s_g2) || !std::isfinite(l_f) || !std::isfinite(l_g) ||
        !std::isfinite(s_on2))
      throw ArgumentError("hyperparameters must be finite");
  }
};

// Data set of noiseless states, applied inputs and noisy residual observations.
class TrainingSet {
 public:
  TrainingSet() = default;
  TrainingSet(std::size_t dim, double noise_variance) : dim_(dim), noise_variance_(noise_variance) {
    if (dim == 0) throw ArgumentError("state dimension must be >= 1");
  }

  void add(const Vector& x, double u, double y) {
    if (dim_ == 0) dim_ = static_cast<std::size_t>(x.size());
    if (static_cast<std::size_t>(x.size()) != dim_)
      throw ArgumentError("training state has dimension " + std::to_string(x.size()) + ", expected " +
                          std::to_string(dim_));
    if (!x.allFinite() || !std::isfinite(u) || !std::isfinite(y))
      throw DataError("training sample contains non-finite entries");
    states_.push_back(x);
    inputs_.push_back(u);
    targets_.push_back(y);
  }

  [[nodiscard]] std::size_t size() const { return states_.size(); }
  [[nodiscard]] bool empty() const { return states_.empty(); }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] double noise_variance() const { return noise_variance_; }
  void set_noise_variance(double v) { noise_variance_ = v; }

  [[nodiscard]] const Vector& state(std::size_t n) const { return states_[n]; }
  [[nodiscard]] double input(std::size_t n) const { return inputs_[n]; }
  [[nodiscard]] double target(std::size_t n) const { return targets_[n]; }
  [[nodiscard]] InputPoint point(std::size_t n) const { return {states_[n], inputs_[n]}; }

  [[nodiscard]] const std::vector<Vector>& states() const { return states_; }
  [[nodiscard]] const std::vector<double>& inputs() const { return inputs_; }
  [[nodiscard]] const std::vector<double>& targets() const { return targets_; }

  // States as columns of a dim x N matrix.
  [[nodiscard]] Matrix state_matrix() const {
    Matrix X(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(size()));
    for (std::size_t n = 0; n < size(); ++n) X.col(static_cast<Eigen::Index>(n)) = states_[n];
    return X;
  }
  [[nodiscard]] Vector input_vector() const {
    return Eigen::Map<const Vector>(inputs_.data(), static_cast<Eigen::Index>(inputs_.size()));
  }
  [[nodiscard]] Vector target_vector() const {
    return Eigen::Map<const Vector>(targets_.data(), static_cast<Eigen::Index>(targets_.size()));
  }

 private:
  std::size_t dim_ = 0;
  double noise_variance_ = 0.0;
  std::vector<Vector> states_;
  std::vector<double> inputs_;
  std::vector<double> targets_;
};

// Prior mean mu_0(z) = f_hat(x) + g_hat(x) u. `id` identifies the model when
// persisted; constant priors carry their values in `f_value`/`g_value`.
struct PriorMean {
  std::string id = "constant";
  double f_value = 0.0;
  double g_value = 0.0;
  std::function<double(const Vector&)> f_hat;
  std::function<double(const Vector&)> g_hat;

  [[nodiscard]] double f(const Vector& x) const { return f_hat ? f_hat(x) : f_value; }
  [[nodiscard]] double g(const Vector& x) const { return g_hat ? g_hat(x) : g_value; }
  [[nodiscard]] double mean(const Vector& x, double u) const { return f(x) + g(x) * u; }
};

inline PriorMean constant_prior(double f_value, double g_value) {
  PriorMean p;
  p.id = "constant";
  p.f_value = f_value;
  p.g_value = g_value;
  return p;
}

inline PriorMean function_prior(std::string id, std::function<double(const Vector&)> f_hat,
                                std::function<double(const Vector&)> g_hat) {
  PriorMean p;
  p.id = std::move(id);
  p.f_hat = std::move(f_hat);
  p.g_hat = std::move(g_hat);
  return p;
}

// Fill-distance windows and performance fractions.
struct QualityConfig {
  int M = 1;
  double u_bar_f = 0.0;
  double u_low_g = 0.0;
  double u_bar_g = 0.0;
  double chi_f = 0.25;
  double chi_g = 0.25;

  void validate() const {
    if (M < 1) throw ArgumentError("M must be >= 1");
    if (!(u_bar_f >= 0.0)) throw ArgumentError("u_bar_f must be >= 0");
    if (!(u_low_g >= 0.0) || !(u_low_g <= u_bar_g)) throw ArgumentError("need 0 <= u_low_g <= u_bar_g");
    if (!(chi_f > 0.0) || !(chi_g > 0.0)) throw ArgumentError("chi_f and chi_g must be > 0");
  }
  // chi_f + chi_g < 1 is needed for the stability reading of the specs.
  [[nodiscard]] bool stability_fractions() const { return chi_f + chi_g < 1.0; }
};

struct LipschitzConstants {
  double mu_f = 0.0;
  double mu_g = 0.0;
  double var_f = 0.0;
  double var_g = 0.0;
  double f = 0.0;
  double g = 0.0;
};

}  // namespace rhogap
