#pragma once

#include <charconv>
#include <cstdio>
#include <type_traits>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rhogap/errors.hpp"
#include "rhogap/fit.hpp"
#include "rhogap/quality.hpp"
#include "rhogap/sim.hpp"
#include "rhogap/types.hpp"

namespace rhogap {

// Shortest decimal string that round-trips to the same double; inf/-inf/nan spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Everything needed to reproduce the benchmark experiment end to end.
// Defaults are the constants of the published experiment.
struct ExperimentConfig {
  // [system]
  double domain_radius = 2.5;
  double reference_amplitude = 2.0;
  std::string prior = "constant";
  double f_hat = 0.0;
  double g_hat = 20.0;
  // [datagen]
  DataGenConfig datagen;
  // [gp]
  Hyperparameters init{4.0, 4.0, 2.0, 2.0, 0.25};
  std::optional<double> s_on2;  // unset: datagen.s_on^2
  ParameterBox box;
  FitOptions fit;
  int lipschitz_grid = 101;
  // [bounds]
  double tau = 1e-4;
  double delta = 1e-2;
  // [quality]
  int M = 1;
  double chi_f = 0.25;
  double chi_g = 0.25;
  double f_fraction = 0.1;
  double g_fraction = 0.9;
  RhoVariant rho_variant = RhoVariant::AsPrinted;
  double probe_r = 0.5;
  // [control]
  double k_c = 40.0;
  Vector lambda = Vector::Ones(1);
  std::optional<double> mu_g_min;  // unset: 1e-3 |g_hat|
  // [sim]
  SimConfig sim;
  // [assess]
  int grid = 100;
  double snapshot_time = 0.0;
  // [output]
  std::string out_dir = "out";

  [[nodiscard]] int d_x() const { return static_cast<int>(lambda.size()) + 1; }
  [[nodiscard]] double noise_variance() const { return s_on2 ? *s_on2 : datagen.s_on * datagen.s_on; }
  [[nodiscard]] double decoupling_threshold() const { return mu_g_min ? *mu_g_min : 1e-3 * std::abs(g_hat); }

  [[nodiscard]] Hyperparameters initial_hyperparameters() const {
    Hyperparameters h = init;
    h.s_on2 = noise_variance();
    return h;
  }

  [[nodiscard]] SystemSpec system() const {
    SystemSpec s = benchmark_system(f_hat, g_hat, domain_radius);
    s.prior = resolve_prior(prior, f_hat, g_hat);
    return s;
  }

  [[nodiscard]] DataGenConfig datagen_config() const {
    DataGenConfig d = datagen;
    d.reference_amplitude = reference_amplitude;
    return d;
  }

  [[nodiscard]] ControllerConfig controller() const {
    ControllerConfig c;
    c.k_c = k_c;
    c.lambda = lambda;
    c.reference = sinusoid_reference(reference_amplitude, d_x());
    c.mu_g_min = decoupling_threshold();
    return c;
  }

  [[nodiscard]] BoundConfig bound_config(const LipschitzConstants& L) const {
    return {tau, delta, ball_diameter(domain_radius), d_x(), L};
  }

  [[nodiscard]] QualityConfig quality_config(const TrainingSet& data) const {
    QualityConfig q;
    q.M = M;
    q.chi_f = chi_f;
    q.chi_g = chi_g;
    if (!data.empty()) {
      const InputQuantiles iq = input_quantiles(data, f_fraction, g_fraction);
      q.u_bar_f = iq.u_bar_f;
      q.u_low_g = iq.u_low_g;
      q.u_bar_g = iq.u_bar_g;
    }
    return q;
  }

  [[nodiscard]] Box domain_box() const { return Box::cube(d_x(), domain_radius); }

  void validate() const;
  void set(const std::string& key, const std::string& value);
  [[nodiscard]] std::string canonical() const;
  [[nodiscard]] std::string fingerprint() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
    throw ConfigError(key + ": expected a number, got '" + raw + "'");
  return v;
}

inline long long parse_int(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
    throw ConfigError(key + ": expected an integer, got '" + raw + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + raw + "'");
}

inline Vector parse_vector(const std::string& key, const std::string& raw) {
  std::vector<double> vals;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(parse_double(key, item));
  if (vals.empty()) throw ConfigError(key + ": expected a comma-separated list of numbers");
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

inline std::string format_vector(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

struct ConfigKey {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline const std::map<std::string, ConfigKey>& config_keys() {
  using C = ExperimentConfig;
  static const std::map<std::string, ConfigKey> keys = [] {
    std::map<std::string, ConfigKey> k;
    const auto num = [&k](const std::string& name, auto member) {
      k[name] = {[member](C& c, const std::string& key, const std::string& v) { member(c) = parse_double(key, v); },
                 [member](const C& c) { return format_double(member(const_cast<C&>(c))); }};
    };
    const auto integer = [&k](const std::string& name, auto member) {
      k[name] = {[member](C& c, const std::string& key, const std::string& v) {
                   member(c) = static_cast<std::decay_t<decltype(member(c))>>(parse_int(key, v));
                 },
                 [member](const C& c) { return std::to_string(member(const_cast<C&>(c))); }};
    };
    num("system.domain_radius", [](C& c) -> double& { return c.domain_radius; });
    num("system.reference_amplitude", [](C& c) -> double& { return c.reference_amplitude; });
    k["system.prior"] = {[](C& c, const std::string&, const std::string& v) { c.prior = trim(v); },
                         [](const C& c) { return c.prior; }};
    num("system.f_hat", [](C& c) -> double& { return c.f_hat; });
    num("system.g_hat", [](C& c) -> double& { return c.g_hat; });

    integer("datagen.n", [](C& c) -> int& { return c.datagen.n; });
    num("datagen.s_on", [](C& c) -> double& { return c.datagen.s_on; });
    num("datagen.gain", [](C& c) -> double& { return c.datagen.gain; });
    k["datagen.lambda"] = {[](C& c, const std::string& key, const std::string& v) { c.datagen.lambda = parse_vector(key, v); },
                           [](const C& c) { return format_vector(c.datagen.lambda); }};
    num("datagen.horizon", [](C& c) -> double& { return c.datagen.horizon; });
    num("datagen.dt", [](C& c) -> double& { return c.datagen.dt; });
    integer("datagen.seed", [](C& c) -> std::uint64_t& { return c.datagen.seed; });

    num("gp.s_f2", [](C& c) -> double& { return c.init.s_f2; });
    num("gp.s_g2", [](C& c) -> double& { return c.init.s_g2; });
    num("gp.l_f", [](C& c) -> double& { return c.init.l_f; });
    num("gp.l_g", [](C& c) -> double& { return c.init.l_g; });
    k["gp.s_on2"] = {[](C& c, const std::string& key, const std::string& v) {
                       if (trim(v) == "auto") c.s_on2.reset();
                       else c.s_on2 = parse_double(key, v);
                     },
                     [](const C& c) { return c.s_on2 ? format_double(*c.s_on2) : std::string("auto"); }};
    const char* names[5] = {"s_f2", "s_g2", "l_f", "l_g", "s_on2"};
    for (int i = 0; i < 5; ++i) {
      num(std::string("gp.") + names[i] + "_min", [i](C& c) -> double& { return c.box.lower[i]; });
      num(std::string("gp.") + names[i] + "_max", [i](C& c) -> double& { return c.box.upper[i]; });
    }
    k["gp.optimize_noise"] = {[](C& c, const std::string& key, const std::string& v) { c.fit.optimize_noise = parse_bool(key, v); },
                              [](const C& c) { return std::string(c.fit.optimize_noise ? "true" : "false"); }};
    integer("gp.restarts", [](C& c) -> int& { return c.fit.restarts; });
    integer("gp.max_iterations", [](C& c) -> int& { return c.fit.max_iterations; });
    num("gp.tolerance", [](C& c) -> double& { return c.fit.tolerance; });
    integer("gp.fit_seed", [](C& c) -> std::uint64_t& { return c.fit.seed; });
    integer("gp.lipschitz_grid", [](C& c) -> int& { return c.lipschitz_grid; });

    num("bounds.tau", [](C& c) -> double& { return c.tau; });
    num("bounds.delta", [](C& c) -> double& { return c.delta; });

    integer("quality.m", [](C& c) -> int& { return c.M; });
    num("quality.chi_f", [](C& c) -> double& { return c.chi_f; });
    num("quality.chi_g", [](C& c) -> double& { return c.chi_g; });
    num("quality.f_fraction", [](C& c) -> double& { return c.f_fraction; });
    num("quality.g_fraction", [](C& c) -> double& { return c.g_fraction; });
    num("quality.probe_r", [](C& c) -> double& { return c.probe_r; });
    k["quality.rho_variant"] = {[](C& c, const std::string& key, const std::string& v) {
                                  const std::string s = trim(v);
                                  if (s == "as_printed") c.rho_variant = RhoVariant::AsPrinted;
                                  else if (s == "consistent") c.rho_variant = RhoVariant::DimensionallyConsistent;
                                  else throw ConfigError(key + ": expected as_printed or consistent, got '" + v + "'");
                                },
                                [](const C& c) {
                                  return std::string(c.rho_variant == RhoVariant::AsPrinted ? "as_printed" : "consistent");
                                }};

    num("control.k_c", [](C& c) -> double& { return c.k_c; });
    k["control.lambda"] = {[](C& c, const std::string& key, const std::string& v) { c.lambda = parse_vector(key, v); },
                           [](const C& c) { return format_vector(c.lambda); }};
    k["control.mu_g_min"] = {[](C& c, const std::string& key, const std::string& v) {
                               if (trim(v) == "auto") c.mu_g_min.reset();
                               else c.mu_g_min = parse_double(key, v);
                             },
                             [](const C& c) { return c.mu_g_min ? format_double(*c.mu_g_min) : std::string("auto"); }};

    num("sim.horizon", [](C& c) -> double& { return c.sim.horizon; });
    num("sim.dt", [](C& c) -> double& { return c.sim.dt; });
    k["sim.x0"] = {[](C& c, const std::string& key, const std::string& v) { c.sim.x0 = parse_vector(key, v); },
                   [](const C& c) { return format_vector(c.sim.x0); }};
    integer("sim.record_stride", [](C& c) -> int& { return c.sim.record_stride; });
    k["sim.control_update"] = {[](C& c, const std::string& key, const std::string& v) {
                                 const std::string s = trim(v);
                                 if (s == "zoh") c.sim.update = ControlUpdate::ZeroOrderHold;
                                 else if (s == "per_stage") c.sim.update = ControlUpdate::PerStage;
                                 else throw ConfigError(key + ": expected zoh or per_stage, got '" + v + "'");
                               },
                               [](const C& c) {
                                 return std::string(c.sim.update == ControlUpdate::ZeroOrderHold ? "zoh" : "per_stage");
                               }};

    integer("assess.grid", [](C& c) -> int& { return c.grid; });
    num("assess.snapshot_time", [](C& c) -> double& { return c.snapshot_time; });
    k["output.dir"] = {[](C& c, const std::string&, const std::string& v) { c.out_dir = trim(v); },
                       [](const C& c) { return c.out_dir; }};
    return k;
  }();
  return keys;
}

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = detail::config_keys();
  const auto it = keys.find(key);
  if (it == keys.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

inline void ExperimentConfig::validate() const {
  using detail::require;
  require(domain_radius > 0, "system.domain_radius", "must be > 0");
  require(prior == "constant" || prior == "benchmark_exact", "system.prior", "must be constant or benchmark_exact");
  require(prior != "constant" || std::abs(g_hat) > 0, "system.g_hat", "must be nonzero");
  require(datagen.n >= 1, "datagen.n", "must be >= 1");
  require(datagen.s_on >= 0, "datagen.s_on", "must be >= 0");
  require(datagen.gain > 0, "datagen.gain", "must be > 0");
  require(datagen.lambda.size() == lambda.size(), "datagen.lambda", "must have d_x - 1 entries");
  require(datagen.horizon > 0, "datagen.horizon", "must be > 0");
  require(datagen.dt > 0, "datagen.dt", "must be > 0");
  require(init.s_f2 > 0, "gp.s_f2", "must be > 0");
  require(init.s_g2 > 0, "gp.s_g2", "must be > 0");
  require(init.l_f > 0, "gp.l_f", "must be > 0");
  require(init.l_g > 0, "gp.l_g", "must be > 0");
  require(noise_variance() > 0, "gp.s_on2", "noise variance must be > 0");
  const char* names[5] = {"s_f2", "s_g2", "l_f", "l_g", "s_on2"};
  Hyperparameters h = initial_hyperparameters();
  const auto a = detail::to_array(h);
  for (int i = 0; i < 5; ++i) {
    const std::string key = std::string("gp.") + names[i];
    require(box.lower[i] > 0 && box.lower[i] <= box.upper[i], key + "_min", "need 0 < min <= max");
    require(a[i] >= box.lower[i] && a[i] <= box.upper[i], key, "initial value outside [min, max]");
  }
  require(fit.restarts >= 1, "gp.restarts", "must be >= 1");
  require(fit.max_iterations >= 1, "gp.max_iterations", "must be >= 1");
  require(fit.tolerance > 0, "gp.tolerance", "must be > 0");
  require(lipschitz_grid >= 3, "gp.lipschitz_grid", "must be >= 3");
  require(tau > 0, "bounds.tau", "must be > 0");
  require(delta > 0 && delta < 1, "bounds.delta", "must lie in (0, 1)");
  require(M >= 1, "quality.m", "must be >= 1");
  require(chi_f > 0, "quality.chi_f", "must be > 0");
  require(chi_g > 0, "quality.chi_g", "must be > 0");
  require(f_fraction > 0 && f_fraction <= 1, "quality.f_fraction", "must lie in (0, 1]");
  require(g_fraction > 0 && g_fraction <= 1, "quality.g_fraction", "must lie in (0, 1]");
  require(probe_r > 0, "quality.probe_r", "must be > 0");
  require(k_c > 0, "control.k_c", "must be > 0");
  require(lambda.size() >= 1, "control.lambda", "needs at least one coefficient");
  {
    ControllerConfig c;
    c.lambda = lambda;
    require(c.hurwitz(), "control.lambda", "coefficients are not Hurwitz");
  }
  require(decoupling_threshold() >= 0, "control.mu_g_min", "must be >= 0");
  require(sim.horizon > 0, "sim.horizon", "must be > 0");
  require(sim.dt > 0, "sim.dt", "must be > 0");
  require(sim.x0.size() == d_x(), "sim.x0", "must have d_x entries");
  require(sim.record_stride >= 1, "sim.record_stride", "must be >= 1");
  require(grid >= 1, "assess.grid", "must be >= 1");
  require(!out_dir.empty(), "output.dir", "must not be empty");
  require(d_x() == 2, "control.lambda", "the shipped benchmark system has d_x = 2");
}

inline std::string ExperimentConfig::canonical() const {
  std::string s;
  for (const auto& [key, entry] : detail::config_keys()) {
    if (key == "output.dir") continue;
    s += key + "=" + entry.get(*this) + "\n";
  }
  return s;
}

// FNV-1a 64 of the canonical key=value dump (output directory excluded).
inline std::string ExperimentConfig::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Reads a sectioned key = value file. Keys outside a section, unknown
// sections and unknown keys are errors.
inline ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg;
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError("config key '" + section + "' must appear inside a section");
    for (const auto& [key, value] : body) cfg.set(section + "." + key, value.get_value<std::string>());
  }
  cfg.validate();
  return cfg;
}

}  // namespace rhogap
