#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "rhogap/errors.hpp"
#include "rhogap/types.hpp"

namespace rhogap {

// Squared exponential kernel s2 * exp(-|x - x'|^2 / (2 l^2)).
inline double se_kernel(const Vector& x, const Vector& xp, double s2, double l) {
  if (x.size() != xp.size()) throw ArgumentError("se_kernel: dimension mismatch");
  if (!(l > 0.0)) throw ArgumentError("se_kernel: length scale must be > 0");
  if (!(s2 >= 0.0)) throw ArgumentError("se_kernel: variance must be >= 0");
  return s2 * std::exp(-(x - xp).squaredNorm() / (2.0 * l * l));
}

// k(z, z') = k_f(x, x') + u k_g(x, x') u'
inline double composite_kernel(const InputPoint& z, const InputPoint& zp, const Hyperparameters& h) {
  return se_kernel(z.x, zp.x, h.s_f2, h.l_f) + (z.u * zp.u) * se_kernel(z.x, zp.x, h.s_g2, h.l_g);
}

// Diagonal jitter added before factorizing the Gram matrix.
inline double gram_jitter(const Hyperparameters& h) { return 1e-10 * (h.s_f2 + h.s_g2); }

namespace detail {

// Pairwise squared distances between the columns of A (d x n) and B (d x m).
inline Matrix squared_distances(const Matrix& A, const Matrix& B) {
  Matrix D = (-2.0 * A.transpose() * B).eval();
  D.colwise() += A.colwise().squaredNorm().transpose();
  D.rowwise() += B.colwise().squaredNorm();
  return D.cwiseMax(0.0);
}

inline Matrix se_from_sqdist(const Matrix& D2, double s2, double l) {
  return s2 * (D2.array() * (-1.0 / (2.0 * l * l))).exp().matrix();
}

}  // namespace detail

// K + s_on^2 I for the composite kernel (no jitter).
inline Matrix gram_matrix(const TrainingSet& data, const Hyperparameters& h) {
  if (data.empty()) throw ArgumentError("gram_matrix: need at least one sample");
  h.validate();
  const Matrix X = data.state_matrix();
  const Vector u = data.input_vector();
  const Matrix D2 = detail::squared_distances(X, X);
  Matrix K = detail::se_from_sqdist(D2, h.s_f2, h.l_f);
  K.noalias() += (u * u.transpose()).cwiseProduct(detail::se_from_sqdist(D2, h.s_g2, h.l_g));
  K = (0.5 * (K + K.transpose())).eval();
  K.diagonal().array() += h.s_on2;
  return K;
}

struct KernelVectors {
  Vector k_f;
  Vector k_g;
  Vector u;  // diagonal of U

  [[nodiscard]] auto U() const { return u.asDiagonal(); }
  // Composite kernel vector k(z) = k_f + U k_g u at a query input u.
  [[nodiscard]] Vector composite(double query_u) const { return k_f + (u.cwiseProduct(k_g)) * query_u; }
};

inline KernelVectors kernel_vectors(const Vector& x, const TrainingSet& data, const Hyperparameters& h) {
  if (!data.empty() && static_cast<std::size_t>(x.size()) != data.dim())
    throw ArgumentError("kernel_vectors: dimension mismatch");
  const auto n = static_cast<Eigen::Index>(data.size());
  KernelVectors kv{Vector(n), Vector(n), data.input_vector()};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d2 = (data.state(static_cast<std::size_t>(i)) - x).squaredNorm();
    kv.k_f[i] = h.s_f2 * std::exp(-d2 / (2.0 * h.l_f * h.l_f));
    kv.k_g[i] = h.s_g2 * std::exp(-d2 / (2.0 * h.l_g * h.l_g));
  }
  return kv;
}

}  // namespace rhogap
