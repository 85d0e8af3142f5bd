#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "rhogap/errors.hpp"
#include "rhogap/kernels.hpp"
#include "rhogap/parallel.hpp"
#include "rhogap/types.hpp"

namespace rhogap {

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

// Mean and variance components of f and g at one state. `cross` is the
// coupling term k_f^T (K + s_on^2 I)^-1 U k_g, which enters
// sigma^2(z) = sigma_f^2 + u^2 sigma_g^2 - 2 u cross.
struct PosteriorComponents {
  double mu_f = 0.0;
  double mu_g = 0.0;
  double var_f = 0.0;
  double var_g = 0.0;
  double cross = 0.0;
};

struct PosteriorBatch {
  Vector mu_f;
  Vector mu_g;
  Vector var_f;
  Vector var_g;
};

namespace detail {

// Round-off can push a Schur complement slightly below zero.
inline double clamp_variance(double v, double scale) {
  if (v < -1e-9 * std::max(1.0, scale))
    throw NumericalError("posterior variance " + std::to_string(v) + " is negative beyond round-off");
  return std::max(v, 0.0);
}

inline Eigen::LLT<Matrix> factorize(const TrainingSet& data, const Hyperparameters& h) {
  Matrix A = gram_matrix(data, h);
  A.diagonal().array() += gram_jitter(h);
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success)
    throw NumericalError("Cholesky factorization of the Gram matrix failed (degenerate hyperparameters or duplicated data)");
  return llt;
}

}  // namespace detail

// Composite-kernel GP conditioned on a training set. Immutable once built;
// the Cholesky factor and (K + s_on^2 I)^-1 y are cached at construction.
class GPModel {
 public:
  GPModel(TrainingSet data, Hyperparameters h, PriorMean prior)
      : data_(std::move(data)), h_(h), prior_(std::move(prior)) {
    h_.validate();
    if (data_.empty()) return;
    X_ = data_.state_matrix();
    u_ = data_.input_vector();
    y_ = data_.target_vector();
    llt_ = detail::factorize(data_, h_);
    alpha_ = llt_.solve(y_);
    u_alpha_ = u_.cwiseProduct(alpha_);
  }

  [[nodiscard]] const TrainingSet& data() const { return data_; }
  [[nodiscard]] const Hyperparameters& hyperparameters() const { return h_; }
  [[nodiscard]] const PriorMean& prior() const { return prior_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  // Posterior of the full residual model h(z) at z = [x; u].
  [[nodiscard]] Posterior posterior(const InputPoint& z) const {
    check_dim(z.x);
    const double prior_mean = prior_.mean(z.x, z.u);
    const double kzz = h_.s_f2 + z.u * z.u * h_.s_g2;
    if (data_.empty()) return {prior_mean, kzz};
    const Vector k = kernel_vectors(z.x, data_, h_).composite(z.u);
    const Vector v = llt_.matrixL().solve(k);
    return {prior_mean + k.dot(alpha_), detail::clamp_variance(kzz - v.squaredNorm(), kzz)};
  }

  [[nodiscard]] Posterior posterior_f(const Vector& x) const {
    const auto c = components(x);
    return {c.mu_f, c.var_f};
  }
  [[nodiscard]] Posterior posterior_g(const Vector& x) const {
    const auto c = components(x);
    return {c.mu_g, c.var_g};
  }

  [[nodiscard]] PosteriorComponents components(const Vector& x) const {
    check_dim(x);
    PosteriorComponents c{prior_.f(x), prior_.g(x), h_.s_f2, h_.s_g2, 0.0};
    if (data_.empty()) return c;
    const KernelVectors kv = kernel_vectors(x, data_, h_);
    c.mu_f += kv.k_f.dot(alpha_);
    c.mu_g += kv.k_g.dot(u_alpha_);
    const Vector vf = llt_.matrixL().solve(kv.k_f);
    const Vector vg = llt_.matrixL().solve(Vector(kv.u.cwiseProduct(kv.k_g)));
    c.var_f = detail::clamp_variance(h_.s_f2 - vf.squaredNorm(), h_.s_f2);
    c.var_g = detail::clamp_variance(h_.s_g2 - vg.squaredNorm(), h_.s_g2);
    c.cross = vf.dot(vg);
    return c;
  }

  // (mu_f, mu_g) only; O(N) per call, used inside the control loop.
  [[nodiscard]] std::pair<double, double> means(const Vector& x) const {
    check_dim(x);
    double mf = prior_.f(x);
    double mg = prior_.g(x);
    if (data_.empty()) return {mf, mg};
    const double cf = -1.0 / (2.0 * h_.l_f * h_.l_f);
    const double cg = -1.0 / (2.0 * h_.l_g * h_.l_g);
    double sf = 0.0, sg = 0.0;
    for (Eigen::Index n = 0; n < X_.cols(); ++n) {
      const double d2 = (X_.col(n) - x).squaredNorm();
      sf += std::exp(cf * d2) * alpha_[n];
      sg += std::exp(cg * d2) * u_alpha_[n];
    }
    return {mf + h_.s_f2 * sf, mg + h_.s_g2 * sg};
  }

  // Components at the columns of Q (d x P), evaluated blockwise in parallel.
  [[nodiscard]] PosteriorBatch batch(const Matrix& Q) const {
    const Eigen::Index P = Q.cols();
    if (P > 0 && !data_.empty() && static_cast<std::size_t>(Q.rows()) != dim())
      throw ArgumentError("batch: query dimension mismatch");
    PosteriorBatch out{Vector(P), Vector(P), Vector(P), Vector(P)};
    constexpr Eigen::Index kBlock = 512;
    const auto blocks = static_cast<std::size_t>((P + kBlock - 1) / kBlock);
    parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t b = b0; b < b1; ++b) {
        const Eigen::Index start = static_cast<Eigen::Index>(b) * kBlock;
        const Eigen::Index len = std::min(kBlock, P - start);
        evaluate_block(Q.middleCols(start, len), start, out);
      }
    });
    return out;
  }

  // log p(y | Z, h); targets are residuals with respect to the prior mean.
  [[nodiscard]] double log_marginal_likelihood() const {
    const auto n = static_cast<double>(data_.size());
    if (data_.empty()) return 0.0;
    const double logdet = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
    return -0.5 * y_.dot(alpha_) - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
  }

  // Gradient of log_marginal_likelihood with respect to
  // (log s_f2, log s_g2, log l_f, log l_g, log s_on2).
  [[nodiscard]] std::array<double, 5> log_marginal_likelihood_gradient() const {
    std::array<double, 5> g{};
    if (data_.empty()) return g;
    const Eigen::Index n = X_.cols();
    const Matrix D2 = detail::squared_distances(X_, X_);
    const Matrix Kf = detail::se_from_sqdist(D2, h_.s_f2, h_.l_f);
    const Matrix UKgU = (u_ * u_.transpose()).cwiseProduct(detail::se_from_sqdist(D2, h_.s_g2, h_.l_g));
    Matrix W = -llt_.solve(Matrix::Identity(n, n));
    W.noalias() += alpha_ * alpha_.transpose();
    const double jit = 1e-10;  // d(jitter)/d(log s2) = 1e-10 * s2
    g[0] = 0.5 * (W.cwiseProduct(Kf).sum() + jit * h_.s_f2 * W.trace());
    g[1] = 0.5 * (W.cwiseProduct(UKgU).sum() + jit * h_.s_g2 * W.trace());
    g[2] = 0.5 * W.cwiseProduct(Kf.cwiseProduct(D2) / (h_.l_f * h_.l_f)).sum();
    g[3] = 0.5 * W.cwiseProduct(UKgU.cwiseProduct(D2) / (h_.l_g * h_.l_g)).sum();
    g[4] = 0.5 * h_.s_on2 * W.trace();
    return g;
  }

 private:
  [[nodiscard]] std::size_t dim() const { return data_.empty() ? 0 : data_.dim(); }

  void check_dim(const Vector& x) const {
    if (!data_.empty() && static_cast<std::size_t>(x.size()) != data_.dim())
      throw ArgumentError("query state has dimension " + std::to_string(x.size()) + ", model expects " +
                          std::to_string(data_.dim()));
  }

  void evaluate_block(const Eigen::Ref<const Matrix>& Q, Eigen::Index offset, PosteriorBatch& out) const {
    const Eigen::Index len = Q.cols();
    for (Eigen::Index j = 0; j < len; ++j) {
      const Vector x = Q.col(j);
      out.mu_f[offset + j] = prior_.f(x);
      out.mu_g[offset + j] = prior_.g(x);
    }
    if (data_.empty()) {
      out.var_f.segment(offset, len).setConstant(h_.s_f2);
      out.var_g.segment(offset, len).setConstant(h_.s_g2);
      return;
    }
    const Matrix D2 = detail::squared_distances(X_, Q);
    Matrix Kf = detail::se_from_sqdist(D2, h_.s_f2, h_.l_f);
    Matrix UKg = u_.asDiagonal() * detail::se_from_sqdist(D2, h_.s_g2, h_.l_g);
    out.mu_f.segment(offset, len) += Kf.transpose() * alpha_;
    out.mu_g.segment(offset, len) += UKg.transpose() * alpha_;
    llt_.matrixL().solveInPlace(Kf);
    llt_.matrixL().solveInPlace(UKg);
    const Vector qf = Kf.colwise().squaredNorm().transpose();
    const Vector qg = UKg.colwise().squaredNorm().transpose();
    for (Eigen::Index j = 0; j < len; ++j) {
      out.var_f[offset + j] = detail::clamp_variance(h_.s_f2 - qf[j], h_.s_f2);
      out.var_g[offset + j] = detail::clamp_variance(h_.s_g2 - qg[j], h_.s_g2);
    }
  }

  TrainingSet data_;
  Hyperparameters h_;
  PriorMean prior_;
  Matrix X_;
  Vector u_;
  Vector y_;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;
  Vector u_alpha_;
};

inline double log_marginal_likelihood(const TrainingSet& data, const Hyperparameters& h) {
  if (data.empty()) throw DataError("log_marginal_likelihood: need at least one sample");
  return GPModel(data, h, constant_prior(0.0, 0.0)).log_marginal_likelihood();
}

}  // namespace rhogap
