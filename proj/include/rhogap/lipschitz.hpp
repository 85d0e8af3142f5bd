#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rhogap/errors.hpp"
#include "rhogap/gp.hpp"
#include "rhogap/types.hpp"

namespace rhogap {

// Axis-aligned box in state space.
struct Box {
  Vector lower;
  Vector upper;

  static Box cube(Eigen::Index dim, double half_width) {
    return {Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width)};
  }
  [[nodiscard]] Eigen::Index dim() const { return lower.size(); }
};

// Lattice with `resolution` points per axis, first axis fastest.
inline Matrix lattice(const Box& box, int resolution) {
  if (resolution < 2) throw ArgumentError("lattice: resolution must be >= 2");
  const Eigen::Index d = box.dim();
  Eigen::Index total = 1;
  for (Eigen::Index i = 0; i < d; ++i) total *= resolution;
  Matrix P(d, total);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (Eigen::Index k = 0; k < total; ++k) {
    for (Eigen::Index i = 0; i < d; ++i)
      P(i, k) = box.lower[i] + (box.upper[i] - box.lower[i]) * idx[static_cast<std::size_t>(i)] / (resolution - 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (++idx[i] < resolution) break;
      idx[i] = 0;
    }
  }
  return P;
}

// Max central-difference gradient norms of mu_f, mu_g, sigma_f^2, sigma_g^2
// over the interior of a lattice on `box`, step = lattice spacing. The
// Lipschitz constants of f and g are bounded by twice those of the means.
inline LipschitzConstants estimate_lipschitz(const GPModel& model, const Box& box, int resolution) {
  if (resolution < 2) throw ArgumentError("estimate_lipschitz: grid_resolution must be >= 2");
  const Eigen::Index d = box.dim();
  const Matrix P = lattice(box, resolution);
  const PosteriorBatch b = model.batch(P);

  std::vector<Eigen::Index> stride(static_cast<std::size_t>(d));
  Eigen::Index s = 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    stride[static_cast<std::size_t>(i)] = s;
    s *= resolution;
  }
  Vector spacing(d);
  for (Eigen::Index i = 0; i < d; ++i) spacing[i] = (box.upper[i] - box.lower[i]) / (resolution - 1);

  const Vector* fields[4] = {&b.mu_f, &b.mu_g, &b.var_f, &b.var_g};
  double best[4] = {0.0, 0.0, 0.0, 0.0};
  for (Eigen::Index k = 0; k < P.cols(); ++k) {
    bool interior = true;
    for (Eigen::Index i = 0; i < d && interior; ++i) {
      const Eigen::Index c = (k / stride[static_cast<std::size_t>(i)]) % resolution;
      interior = (c > 0 && c < resolution - 1);
    }
    if (!interior) continue;
    for (int f = 0; f < 4; ++f) {
      double g2 = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        if (spacing[i] == 0.0) continue;
        const Eigen::Index st = stride[static_cast<std::size_t>(i)];
        const double di = ((*fields[f])[k + st] - (*fields[f])[k - st]) / (2.0 * spacing[i]);
        g2 += di * di;
      }
      best[f] = std::max(best[f], std::sqrt(g2));
    }
  }
  return {best[0], best[1], best[2], best[3], 2.0 * best[0], 2.0 * best[1]};
}

}  // namespace rhogap
