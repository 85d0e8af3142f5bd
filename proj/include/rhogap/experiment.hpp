#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "rhogap/bounds.hpp"
#include "rhogap/config.hpp"
#include "rhogap/control.hpp"
#include "rhogap/errors.hpp"
#include "rhogap/fit.hpp"
#include "rhogap/gp.hpp"
#include "rhogap/lipschitz.hpp"
#include "rhogap/quality.hpp"
#include "rhogap/sim.hpp"

namespace rhogap {

// Re-raises errors of a pipeline stage with the stage name prefixed,
// keeping the error category (and hence the CLI exit code).
template <class Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  const std::string tag = "[" + stage + "] ";
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(tag + e.what());
  } catch (const DataError& e) {
    throw DataError(tag + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(tag + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError(tag + e.what());
  }
}

// Spearman rank correlation (average ranks for ties). NaN for constant input.
inline double rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ArgumentError("rank_correlation: need two equal-length series");
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

struct FittedModel {
  GPModel model;
  FitResult fit;
  LipschitzConstants lipschitz;
};

inline TrainingSet generate_stage(const ExperimentConfig& cfg) {
  return run_stage("generate", [&] { return generate_training_data(cfg.system(), cfg.datagen_config()); });
}

inline FitResult fit_stage(const ExperimentConfig& cfg, const TrainingSet& data) {
  return run_stage("fit", [&] {
    return fit(data, cfg.initial_hyperparameters(), cfg.box, cfg.fit);
  });
}

inline LipschitzConstants lipschitz_stage(const ExperimentConfig& cfg, const GPModel& model) {
  return run_stage("lipschitz", [&] { return estimate_lipschitz(model, cfg.domain_box(), cfg.lipschitz_grid); });
}

inline SimResult simulate_stage(const ExperimentConfig& cfg, const GPModel& model, const BoundConfig& bc) {
  return run_stage("simulate",
                   [&] { return simulate_closed_loop(cfg.system(), model, cfg.controller(), bc, cfg.sim); });
}

// rho-gaps on the reference curve: x = x_d(t) probed with an error whose
// filtered state equals probe_r, and the GP control input for that error.
struct ReferenceRhoSample {
  double t = 0.0;
  RhoGapSample rho;
  double radius = 0.0;  // ultimate-bound radius of the simulation at t
};

inline std::vector<ReferenceRhoSample> reference_rho_series(const ExperimentConfig& cfg, const GPModel& model,
                                                            const BoundConfig& bc, const QualityConfig& q,
                                                            const SimResult& sim, double t_begin, double t_end) {
  const ControllerConfig ctrl = cfg.controller();
  Vector e = Vector::Zero(cfg.d_x());
  e[cfg.d_x() - 1] = cfg.probe_r;
  std::vector<const TrajectorySample*> picks;
  for (const auto& s : sim.samples)
    if (s.t >= t_begin && s.t <= t_end) picks.push_back(&s);
  std::vector<ReferenceRhoSample> out(picks.size());
  parallel_for(picks.size(), [&](std::size_t b, std::size_t end) {
    for (std::size_t i = b; i < end; ++i) {
      const double t = picks[i]->t;
      const Vector xr = ctrl.reference.state(t);
      const auto [mu_f, mu_g] = model.means(xr);
      double pi = std::numeric_limits<double>::quiet_NaN();
      try {
        pi = decoupled_input(linearized_input(e, t, ctrl), mu_f, mu_g, ctrl.mu_g_min);
      } catch (const SingularDecouplingError&) {
      }
      out[i] = {t, rho_gaps(xr, e, pi, model, bc, q, ctrl, cfg.rho_variant), picks[i]->bound.radius};
    }
  });
  return out;
}

struct AssessResult {
  Matrix grid;
  std::vector<RhoGapSample> field;
  std::vector<ReferenceRhoSample> reference;
};

struct ExperimentSummary {
  Hyperparameters h;
  double log_likelihood = 0.0;
  LipschitzConstants lipschitz;
  double beta = 0.0;
  double gamma_f = 0.0;
  double gamma_g = 0.0;
  double eta = 0.0;
  QualityConfig quality;
  double theta_f = 0.0;
  double theta_g = 0.0;
  std::size_t samples_after_transient = 0;
  double containment_fraction = 0.0;  // err_lambda <= radius for t > 1
  std::size_t infeasible_samples = 0;
  double max_radius = 0.0;
  double max_err_lambda = 0.0;
  double rho_f_radius_correlation = 0.0;
  double rho_g_radius_correlation = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  TrainingSet data;
  std::optional<GPModel> model;
  FitResult fit;
  LipschitzConstants lipschitz;
  BoundConfig bounds;
  QualityConfig quality;
  SimResult sim;
  AssessResult assess;
  ExperimentSummary summary;
};

// Transient length excluded from the containment check.
inline constexpr double kTransient = 1.0;

inline double containment_fraction(const SimResult& sim, double t_min, std::size_t* counted = nullptr,
                                   std::size_t* infeasible = nullptr) {
  std::size_t n = 0, ok = 0, bad = 0;
  for (const auto& s : sim.samples) {
    if (s.t <= t_min) continue;
    ++n;
    if (!s.bound.feasible) ++bad;
    if (s.bound.feasible && s.err_lambda <= s.bound.radius) ++ok;
  }
  if (counted) *counted = n;
  if (infeasible) *infeasible = bad;
  return n ? static_cast<double>(ok) / static_cast<double>(n) : 0.0;
}

inline AssessResult assess_stage(const ExperimentConfig& cfg, const GPModel& model, const BoundConfig& bc,
                                 const QualityConfig& q, const SimResult* sim) {
  return run_stage("assess", [&] {
    AssessResult a;
    a.grid = ball_grid(cfg.d_x(), cfg.domain_radius, cfg.grid);
    a.field = rho_field(a.grid, cfg.snapshot_time, model, bc, q, cfg.controller(), cfg.rho_variant);
    if (sim && !sim->samples.empty()) {
      const double t_end = sim->samples.back().t;
      a.reference = reference_rho_series(cfg, model, bc, q, *sim, t_end - 2.0 * std::numbers::pi, t_end);
    }
    return a;
  });
}

inline ExperimentSummary summarize(const ExperimentConfig& cfg, const GPModel& model, const FitResult& fitted,
                                   const LipschitzConstants& L, const BoundConfig& bc, const QualityConfig& q,
                                   const SimResult& sim, const AssessResult& assess) {
  ExperimentSummary s;
  s.h = model.hyperparameters();
  s.log_likelihood = fitted.log_likelihood;
  s.lipschitz = L;
  s.beta = beta(bc);
  s.gamma_f = gamma_f(bc);
  s.gamma_g = gamma_g(bc);
  s.eta = eta(cfg.controller());
  s.quality = q;
  try {
    s.theta_f = theta_f(q, s.h);
  } catch (const DomainError&) {
    s.theta_f = -kInf;
  }
  try {
    s.theta_g = theta_g(q, s.h);
  } catch (const DomainError&) {
    s.theta_g = -kInf;
  }
  s.containment_fraction = containment_fraction(sim, kTransient, &s.samples_after_transient, &s.infeasible_samples);
  for (const auto& p : sim.samples) {
    if (p.t <= kTransient) continue;
    if (p.bound.feasible) s.max_radius = std::max(s.max_radius, p.bound.radius);
    s.max_err_lambda = std::max(s.max_err_lambda, p.err_lambda);
  }
  std::vector<double> rf, rg, rad_f, rad_g;
  for (const auto& r : assess.reference) {
    if (!std::isfinite(r.radius)) continue;
    if (std::isfinite(r.rho.rho_f)) {
      rf.push_back(r.rho.rho_f);
      rad_f.push_back(r.radius);
    }
    if (std::isfinite(r.rho.rho_g)) {
      rg.push_back(r.rho.rho_g);
      rad_g.push_back(r.radius);
    }
  }
  s.rho_f_radius_correlation = rf.size() >= 2 ? rank_correlation(rf, rad_f) : std::nan("");
  s.rho_g_radius_correlation = rg.size() >= 2 ? rank_correlation(rg, rad_g) : std::nan("");
  return s;
}

// generate -> fit -> Lipschitz -> closed loop -> bound along trajectory -> rho fields.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult r;
  r.config = cfg;
  r.data = generate_stage(cfg);
  r.fit = fit_stage(cfg, r.data);
  const GPModel model = run_stage("fit", [&] { return GPModel(r.data, r.fit.h, cfg.system().prior); });
  r.lipschitz = lipschitz_stage(cfg, model);
  r.bounds = cfg.bound_config(r.lipschitz);
  r.quality = cfg.quality_config(r.data);
  r.sim = simulate_stage(cfg, model, r.bounds);
  r.assess = assess_stage(cfg, model, r.bounds, r.quality, &r.sim);
  r.summary = summarize(cfg, model, r.fit, r.lipschitz, r.bounds, r.quality, r.sim, r.assess);
  r.model = model;
  return r;
}

}  // namespace rhogap
