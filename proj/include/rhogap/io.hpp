#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rhogap/config.hpp"
#include "rhogap/errors.hpp"
#include "rhogap/experiment.hpp"
#include "rhogap/gp.hpp"
#include "rhogap/quality.hpp"
#include "rhogap/sim.hpp"
#include "rhogap/types.hpp"

namespace rhogap {

// Writes `content` to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw DataError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out.flush()) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// "# key: value" comment lines shared by every output file.
struct FileHeader {
  std::vector<std::pair<std::string, std::string>> entries;

  void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
  [[nodiscard]] std::string str() const {
    std::string s;
    for (const auto& [k, v] : entries) s += "# " + k + ": " + v + "\n";
    return s;
  }
};

// ---------------------------------------------------------------------------
// Training-set CSV: x1..xd,u,y

inline std::string training_set_csv(const TrainingSet& data, const FileHeader& header) {
  std::string s = header.str();
  for (std::size_t i = 1; i <= data.dim(); ++i) s += "x" + std::to_string(i) + ",";
  s += "u,y\n";
  for (std::size_t n = 0; n < data.size(); ++n) {
    for (Eigen::Index i = 0; i < data.state(n).size(); ++i) s += format_double(data.state(n)[i]) + ",";
    s += format_double(data.input(n)) + "," + format_double(data.target(n)) + "\n";
  }
  return s;
}

inline TrainingSet parse_training_set_csv(const std::string& text, double noise_variance) {
  std::istringstream in(text);
  std::string line;
  std::size_t dim = 0;
  bool have_header = false;
  TrainingSet data;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      if (cells.size() < 3 || cells[cells.size() - 2] != "u" || cells.back() != "y")
        throw DataError("training-set CSV: header must be x1,...,xd,u,y");
      dim = cells.size() - 2;
      data = TrainingSet(dim, noise_variance);
      have_header = true;
      continue;
    }
    if (cells.size() != dim + 2)
      throw DataError("training-set CSV line " + std::to_string(lineno) + ": expected " + std::to_string(dim + 2) +
                      " columns");
    Vector x(static_cast<Eigen::Index>(dim));
    const std::string where = "training-set CSV line " + std::to_string(lineno);
    try {
      for (std::size_t i = 0; i < dim; ++i) x[static_cast<Eigen::Index>(i)] = detail::parse_double(where, cells[i]);
      data.add(x, detail::parse_double(where, cells[dim]), detail::parse_double(where, cells[dim + 1]));
    } catch (const ConfigError& e) {
      throw DataError(e.what());
    }
  }
  if (!have_header) throw DataError("training-set CSV: missing header");
  return data;
}

inline TrainingSet load_training_set(const std::filesystem::path& path, double noise_variance) {
  return parse_training_set_csv(read_file(path), noise_variance);
}

// ---------------------------------------------------------------------------
// Model file: hyperparameters, prior identifier and training set as JSON.
// Factorizations are rebuilt on load.

struct ModelFile {
  Hyperparameters h;
  std::string prior_id = "constant";
  double f_hat = 0.0;
  double g_hat = 0.0;
  TrainingSet data;
  std::optional<LipschitzConstants> lipschitz;

  [[nodiscard]] GPModel model() const { return GPModel(data, h, resolve_prior(prior_id, f_hat, g_hat)); }
};

inline std::string model_json(const ModelFile& m, const FileHeader& header) {
  using nlohmann::json;
  json j;
  j["format"] = "rhogap-model";
  j["version"] = 1;
  json meta = json::object();
  for (const auto& [k, v] : header.entries) meta[k] = v;
  j["meta"] = meta;
  j["hyperparameters"] = {{"s_f2", m.h.s_f2}, {"s_g2", m.h.s_g2}, {"l_f", m.h.l_f}, {"l_g", m.h.l_g}, {"s_on2", m.h.s_on2}};
  j["prior"] = {{"id", m.prior_id}, {"f", m.f_hat}, {"g", m.g_hat}};
  json xs = json::array();
  for (const auto& x : m.data.states()) xs.push_back(std::vector<double>(x.data(), x.data() + x.size()));
  j["training_set"] = {{"state_dim", m.data.dim()}, {"noise_variance", m.data.noise_variance()},
                       {"x", xs}, {"u", m.data.inputs()}, {"y", m.data.targets()}};
  if (m.lipschitz) {
    const auto& L = *m.lipschitz;
    j["lipschitz"] = {{"mu_f", L.mu_f}, {"mu_g", L.mu_g}, {"var_f", L.var_f},
                      {"var_g", L.var_g}, {"f", L.f},       {"g", L.g}};
  }
  return j.dump(1) + "\n";
}

inline ModelFile parse_model_json(const std::string& text) {
  using nlohmann::json;
  ModelFile m;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "rhogap-model") throw DataError("model file: unexpected format tag");
    const auto& h = j.at("hyperparameters");
    m.h = {h.at("s_f2").get<double>(), h.at("s_g2").get<double>(), h.at("l_f").get<double>(),
           h.at("l_g").get<double>(), h.at("s_on2").get<double>()};
    m.prior_id = j.at("prior").at("id").get<std::string>();
    m.f_hat = j.at("prior").at("f").get<double>();
    m.g_hat = j.at("prior").at("g").get<double>();
    const auto& ts = j.at("training_set");
    const auto dim = ts.at("state_dim").get<std::size_t>();
    m.data = TrainingSet(dim, ts.at("noise_variance").get<double>());
    const auto& xs = ts.at("x");
    const auto us = ts.at("u").get<std::vector<double>>();
    const auto ys = ts.at("y").get<std::vector<double>>();
    if (xs.size() != us.size() || us.size() != ys.size()) throw DataError("model file: training-set length mismatch");
    for (std::size_t n = 0; n < us.size(); ++n) {
      const auto x = xs[n].get<std::vector<double>>();
      m.data.add(Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())), us[n], ys[n]);
    }
    if (j.contains("lipschitz")) {
      const auto& L = j.at("lipschitz");
      m.lipschitz = LipschitzConstants{L.at("mu_f").get<double>(), L.at("mu_g").get<double>(),
                                       L.at("var_f").get<double>(), L.at("var_g").get<double>(),
                                       L.at("f").get<double>(), L.at("g").get<double>()};
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  } catch (const ArgumentError& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  m.h.validate();
  return m;
}

inline ModelFile load_model_file(const std::filesystem::path& path) { return parse_model_json(read_file(path)); }

// ---------------------------------------------------------------------------
// Trajectory + bound CSV and rho-field CSV.

inline std::string trajectory_csv(const SimResult& res, const FileHeader& header) {
  std::string s = header.str();
  const std::size_t d = res.samples.empty() ? 2 : static_cast<std::size_t>(res.samples.front().x.size());
  s += "t,";
  for (std::size_t i = 1; i <= d; ++i) s += "x" + std::to_string(i) + ",";
  s += "u,r,err_lambda,radius,alpha,k_tilde,feasible\n";
  for (const auto& p : res.samples) {
    s += format_double(p.t) + ",";
    for (Eigen::Index i = 0; i < p.x.size(); ++i) s += format_double(p.x[i]) + ",";
    s += format_double(p.u) + "," + format_double(p.r) + "," + format_double(p.err_lambda) + "," +
         format_double(p.bound.radius) + "," + format_double(p.bound.alpha) + "," + format_double(p.bound.k_tilde) +
         "," + (p.bound.feasible ? "1" : "0") + "\n";
  }
  return s;
}

inline const char* kRhoFieldColumns = "x1,x2,phi_f,phi_g,phibar2_f,phibar2_g,theta_f,theta_g,rho_f,rho_g,feasible_f,feasible_g";

inline std::string rho_field_csv(const std::vector<RhoGapSample>& field, const FileHeader& header) {
  std::string s = header.str();
  s += kRhoFieldColumns;
  s += "\n";
  for (const auto& r : field) {
    s += format_double(r.x[0]) + "," + format_double(r.x.size() > 1 ? r.x[1] : 0.0) + "," + format_double(r.phi_f) +
         "," + format_double(r.phi_g) + "," + format_double(r.phibar2_f) + "," + format_double(r.phibar2_g) + "," +
         format_double(r.theta_f) + "," + format_double(r.theta_g) + "," + format_double(r.rho_f) + "," +
         format_double(r.rho_g) + "," + (r.feasible_f ? "1" : "0") + "," + (r.feasible_g ? "1" : "0") + "\n";
  }
  return s;
}

inline std::string rho_reference_csv(const std::vector<ReferenceRhoSample>& series, const FileHeader& header) {
  std::string s = header.str();
  s += "t,x1,x2,rho_f,rho_g,phi_f,phi_g,phibar2_f,phibar2_g,radius\n";
  for (const auto& p : series) {
    const auto& r = p.rho;
    s += format_double(p.t) + "," + format_double(r.x[0]) + "," + format_double(r.x.size() > 1 ? r.x[1] : 0.0) + "," +
         format_double(r.rho_f) + "," + format_double(r.rho_g) + "," + format_double(r.phi_f) + "," +
         format_double(r.phi_g) + "," + format_double(r.phibar2_f) + "," + format_double(r.phibar2_g) + "," +
         format_double(p.radius) + "\n";
  }
  return s;
}

namespace detail {

// Non-finite values are spelled out as strings, JSON has no literal for them.
inline nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

}  // namespace detail

inline std::string summary_json(const ExperimentSummary& s, const FileHeader& header) {
  using nlohmann::json;
  using detail::json_number;
  json j;
  json meta = json::object();
  for (const auto& [k, v] : header.entries) meta[k] = v;
  j["meta"] = meta;
  j["hyperparameters"] = {{"s_f2", s.h.s_f2}, {"s_g2", s.h.s_g2}, {"l_f", s.h.l_f}, {"l_g", s.h.l_g}, {"s_on2", s.h.s_on2}};
  j["log_likelihood"] = json_number(s.log_likelihood);
  j["lipschitz"] = {{"mu_f", s.lipschitz.mu_f}, {"mu_g", s.lipschitz.mu_g}, {"var_f", s.lipschitz.var_f},
                    {"var_g", s.lipschitz.var_g}, {"f", s.lipschitz.f},       {"g", s.lipschitz.g}};
  j["beta"] = json_number(s.beta);
  j["gamma_f"] = json_number(s.gamma_f);
  j["gamma_g"] = json_number(s.gamma_g);
  j["eta"] = json_number(s.eta);
  j["quality"] = {{"M", s.quality.M},          {"u_bar_f", s.quality.u_bar_f}, {"u_low_g", s.quality.u_low_g},
                  {"u_bar_g", s.quality.u_bar_g}, {"chi_f", s.quality.chi_f},     {"chi_g", s.quality.chi_g},
                  {"theta_f", json_number(s.theta_f)}, {"theta_g", json_number(s.theta_g)}};
  j["trajectory"] = {{"samples_after_transient", s.samples_after_transient},
                     {"containment_fraction", json_number(s.containment_fraction)},
                     {"infeasible_samples", s.infeasible_samples},
                     {"max_radius", json_number(s.max_radius)},
                     {"max_err_lambda", json_number(s.max_err_lambda)}};
  j["reference"] = {{"rho_f_radius_rank_correlation", json_number(s.rho_f_radius_correlation)},
                    {"rho_g_radius_rank_correlation", json_number(s.rho_g_radius_correlation)}};
  return j.dump(2) + "\n";
}

}  // namespace rhogap
