#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "rhogap/errors.hpp"
#include "rhogap/gp.hpp"
#include "rhogap/types.hpp"

namespace rhogap {

// Box constraints in natural units, ordered (s_f2, s_g2, l_f, l_g, s_on2).
struct ParameterBox {
  std::array<double, 5> lower{1.0, 1.0, 1.0, 1.0, 1e-4};
  std::array<double, 5> upper{1e3, 1e3, 20.0, 20.0, 10.0};

  [[nodiscard]] bool contains(const Hyperparameters& h) const;
};

struct FitOptions {
  int restarts = 5;
  int max_iterations = 400;
  double tolerance = 1e-3;  // simplex size in the unit log coordinates
  bool optimize_noise = false;
  std::uint64_t seed = 0;
};

struct FitResult {
  Hyperparameters h;
  double log_likelihood = 0.0;
  int evaluations = 0;
};

class FittingError : public NumericalError {
 public:
  FittingError(const std::string& what, Hyperparameters best) : NumericalError(what), best_(best) {}
  [[nodiscard]] const Hyperparameters& best() const { return best_; }

 private:
  Hyperparameters best_;
};

namespace detail {

inline std::array<double, 5> to_array(const Hyperparameters& h) { return {h.s_f2, h.s_g2, h.l_f, h.l_g, h.s_on2}; }
inline Hyperparameters from_array(const std::array<double, 5>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }

// Log marginal likelihood over a fixed data set with reused buffers; the
// pairwise distances and input products are computed once.
class LikelihoodEvaluator {
 public:
  explicit LikelihoodEvaluator(const TrainingSet& data) : y_(data.target_vector()) {
    const Matrix X = data.state_matrix();
    const Vector u = data.input_vector();
    scaled_d2_ = -0.5 * squared_distances(X, X);
    uu_ = u * u.transpose();
    A_.resize(X.cols(), X.cols());
    kg_.resize(X.cols(), X.cols());
  }

  // Returns NaN when the Gram matrix cannot be factorized.
  double operator()(const Hyperparameters& h) {
    const Eigen::Index n = A_.rows();
    A_ = h.s_f2 * (scaled_d2_.array() / (h.l_f * h.l_f)).exp();
    kg_ = h.s_g2 * (scaled_d2_.array() / (h.l_g * h.l_g)).exp();
    A_.array() += uu_.array() * kg_.array();
    A_.diagonal().array() += h.s_on2 + gram_jitter(h);
    Eigen::LLT<Eigen::Ref<Matrix>> llt(A_);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
    alpha_ = llt.matrixL().solve(y_);
    const double logdet = 2.0 * A_.diagonal().array().log().sum();
    return -0.5 * alpha_.squaredNorm() - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  }

 private:
  Vector y_;
  Matrix scaled_d2_;
  Matrix uu_;
  Matrix A_;
  Matrix kg_;
  Vector alpha_;
};

// Free parameters live in an unconstrained coordinate w with
// log(theta) = lo + (hi - lo) * clamp(w, 0, 1). The objective is flat outside
// the unit cube, so the simplex still contracts when an optimum sits on a bound.
struct FitProblem {
  LikelihoodEvaluator* lml;
  std::array<double, 5> log_lo{};
  std::array<double, 5> log_hi{};
  std::array<double, 5> fixed{};
  std::vector<int> free;
  int evaluations = 0;
  double best_value = std::numeric_limits<double>::infinity();
  Hyperparameters best_h;

  [[nodiscard]] Hyperparameters decode(const gsl_vector* w) const {
    auto a = fixed;
    for (std::size_t i = 0; i < free.size(); ++i) {
      const int p = free[i];
      const double s = std::clamp(gsl_vector_get(w, i), 0.0, 1.0);
      a[p] = std::exp(log_lo[p] + (log_hi[p] - log_lo[p]) * s);
    }
    return from_array(a);
  }

  [[nodiscard]] double encode(int p, double value) const {
    const double span = log_hi[p] - log_lo[p];
    if (!(span > 0.0)) return 0.0;
    return std::clamp((std::log(value) - log_lo[p]) / span, 0.0, 1.0);
  }

  double negative_lml(const Hyperparameters& h) {
    ++evaluations;
    const double v = -(*lml)(h);
    if (!std::isfinite(v)) return 1e100;
    if (v < best_value) {
      best_value = v;
      best_h = h;
    }
    return v;
  }
};

inline double fit_objective(const gsl_vector* w, void* params) {
  auto* prob = static_cast<FitProblem*>(params);
  return prob->negative_lml(prob->decode(w));
}

}  // namespace detail

inline bool ParameterBox::contains(const Hyperparameters& h) const {
  const auto a = detail::to_array(h);
  for (int i = 0; i < 5; ++i)
    if (!(a[i] >= lower[i] && a[i] <= upper[i])) return false;
  return true;
}

// Multi-start Nelder-Mead maximization of the log marginal likelihood in
// log-parameter space. Restart 0 starts at `init`; the rest at seeded uniform
// draws in the log box. The noise variance stays at init.s_on2 unless
// options.optimize_noise is set.
inline FitResult fit(const TrainingSet& data, const Hyperparameters& init, const ParameterBox& box,
                     const FitOptions& options = {}) {
  if (data.size() < 2) throw DataError("insufficient data: hyperparameter fitting needs N >= 2");
  init.validate();
  for (int i = 0; i < 5; ++i)
    if (!(box.lower[i] > 0.0) || !(box.lower[i] <= box.upper[i]))
      throw ArgumentError("parameter box must satisfy 0 < lower <= upper");
  if (!box.contains(init)) throw ArgumentError("initial hyperparameters lie outside the parameter box");

  detail::LikelihoodEvaluator lml(data);
  detail::FitProblem prob;
  prob.lml = &lml;
  prob.fixed = detail::to_array(init);
  for (int i = 0; i < 5; ++i) {
    prob.log_lo[i] = std::log(box.lower[i]);
    prob.log_hi[i] = std::log(box.upper[i]);
    const bool noise = (i == 4);
    if (box.lower[i] < box.upper[i] && (!noise || options.optimize_noise)) prob.free.push_back(i);
  }
  prob.negative_lml(init);
  prob.best_h = init;

  const std::size_t dim = prob.free.size();
  if (dim == 0) return {init, -prob.best_value, prob.evaluations};

  gsl_error_handler_t* old_handler = gsl_set_error_handler_off();
  boost::random::mt19937_64 rng(options.seed);
  boost::random::uniform_real_distribution<double> unit(0.0, 1.0);

  gsl_multimin_function fn{&detail::fit_objective, dim, &prob};
  gsl_vector* x = gsl_vector_alloc(dim);
  gsl_vector* step = gsl_vector_alloc(dim);
  gsl_multimin_fminimizer* solver = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
  int successful = 0;

  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    for (std::size_t i = 0; i < dim; ++i) {
      const int p = prob.free[i];
      const double value = (r == 0) ? prob.fixed[p]
                                    : std::exp(prob.log_lo[p] + (prob.log_hi[p] - prob.log_lo[p]) * unit(rng));
      gsl_vector_set(x, i, prob.encode(p, value));
    }
    gsl_vector_set_all(step, 0.2);
    if (gsl_multimin_fminimizer_set(solver, &fn, x, step) != GSL_SUCCESS) continue;
    int status = GSL_CONTINUE;
    for (int it = 0; it < options.max_iterations && status == GSL_CONTINUE; ++it) {
      if (gsl_multimin_fminimizer_iterate(solver) != GSL_SUCCESS) break;
      status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver), options.tolerance);
    }
    if (solver->fval < 1e100) ++successful;
  }

  gsl_multimin_fminimizer_free(solver);
  gsl_vector_free(step);
  gsl_vector_free(x);
  gsl_set_error_handler(old_handler);

  if (successful == 0 || !(prob.best_value < 1e100))
    throw FittingError("hyperparameter optimization failed in every restart", prob.best_h);
  return {prob.best_h, -prob.best_value, prob.evaluations};
}

inline Hyperparameters fit_hyperparameters(const TrainingSet& data, const Hyperparameters& init,
                                           const ParameterBox& box, const FitOptions& options = {}) {
  return fit(data, init, box, options).h;
}

}  // namespace rhogap
