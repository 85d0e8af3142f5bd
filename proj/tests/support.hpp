#pragma once

#include <random>
#include <vector>

#include "oracles.hpp"
#include "rhogap/rhogap.hpp"

namespace testing_support {

inline rhogap::TrainingSet to_training_set(const std::vector<oracle::Sample>& s, double noise_variance) {
  rhogap::TrainingSet d(s.empty() ? 2 : static_cast<std::size_t>(s.front().x.size()), noise_variance);
  for (const auto& p : s) d.add(p.x, p.u, p.y);
  return d;
}

inline oracle::Hyp to_oracle(const rhogap::Hyperparameters& h) { return {h.s_f2, h.s_g2, h.l_f, h.l_g, h.s_on2}; }

inline std::vector<oracle::Sample> from_training_set(const rhogap::TrainingSet& d) {
  std::vector<oracle::Sample> s;
  for (std::size_t n = 0; n < d.size(); ++n) s.push_back({d.state(n), d.input(n), d.target(n)});
  return s;
}

inline rhogap::Vector vec2(double a, double b) {
  rhogap::Vector v(2);
  v << a, b;
  return v;
}

// Shortened version of the benchmark data set for fast tests.
inline rhogap::TrainingSet small_benchmark_data(int n = 200, std::uint64_t seed = 3) {
  rhogap::DataGenConfig cfg;
  cfg.n = n;
  cfg.horizon = 6.0 * n / 200.0;
  cfg.seed = seed;
  return rhogap::generate_training_data(rhogap::benchmark_system(), cfg);
}

}  // namespace testing_support
