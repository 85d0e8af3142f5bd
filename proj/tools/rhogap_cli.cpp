#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rhogap/rhogap.hpp"

namespace fs = std::filesystem;
using namespace rhogap;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> grid;
};

ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
  if (g.seed) {
    cfg.datagen.seed = *g.seed;
    cfg.fit.seed = *g.seed;
  }
  if (g.out) cfg.out_dir = *g.out;
  if (g.grid) cfg.grid = *g.grid;
  cfg.validate();
  return cfg;
}

FileHeader header_for(const std::string& command, const ExperimentConfig& cfg) {
  FileHeader h;
  h.add("generator", "rhogap " + command);
  h.add("config_fingerprint", cfg.fingerprint());
  h.add("seed", std::to_string(cfg.datagen.seed));
  return h;
}

FileHeader data_header(const ExperimentConfig& cfg) {
  FileHeader h = header_for("generate", cfg);
  h.add("s_on", format_double(cfg.datagen.s_on));
  h.add("generator_gain", format_double(cfg.datagen.gain));
  return h;
}

void note(const std::string& msg) { std::cerr << "rhogap: " << msg << "\n"; }

void warn(const std::string& msg) { std::cerr << "rhogap: warning: " << msg << "\n"; }

fs::path output_path(const ExperimentConfig& cfg, const char* name) { return fs::path(cfg.out_dir) / name; }

void write_output(const fs::path& path, const std::string& content) {
  write_file_atomic(path, content);
  note("wrote " + path.string());
}

LipschitzConstants model_lipschitz(const ExperimentConfig& cfg, const ModelFile& mf, const GPModel& model) {
  if (mf.lipschitz) return *mf.lipschitz;
  warn("model file carries no Lipschitz constants; estimating them");
  return lipschitz_stage(cfg, model);
}

void report_feasibility(const SimResult& sim) {
  const auto feasible = std::count_if(sim.samples.begin(), sim.samples.end(),
                                      [](const TrajectorySample& s) { return s.bound.feasible; });
  if (feasible == 0) warn("ultimate bound infeasible (alpha >= eta) at every recorded sample");
}

int cmd_generate(const GlobalOptions& g) {
  const ExperimentConfig cfg = resolve_config(g);
  const TrainingSet data = generate_stage(cfg);
  write_output(output_path(cfg, "training_set.csv"), training_set_csv(data, data_header(cfg)));
  return kOk;
}

int cmd_fit(const GlobalOptions& g, const std::string& data_path) {
  const ExperimentConfig cfg = resolve_config(g);
  const fs::path src = data_path.empty() ? output_path(cfg, "training_set.csv") : fs::path(data_path);
  const TrainingSet data = load_training_set(src, cfg.noise_variance());
  const FitResult fr = fit_stage(cfg, data);
  note("log marginal likelihood " + format_double(fr.log_likelihood) + " after " + std::to_string(fr.evaluations) +
       " evaluations");
  ModelFile mf;
  mf.h = fr.h;
  mf.prior_id = cfg.prior;
  mf.f_hat = cfg.f_hat;
  mf.g_hat = cfg.g_hat;
  mf.data = data;
  mf.lipschitz = lipschitz_stage(cfg, mf.model());
  write_output(output_path(cfg, "model.json"), model_json(mf, header_for("fit", cfg)));
  return kOk;
}

int cmd_simulate(const GlobalOptions& g, const std::string& model_path) {
  const ExperimentConfig cfg = resolve_config(g);
  const ModelFile mf = load_model_file(model_path.empty() ? output_path(cfg, "model.json") : fs::path(model_path));
  const GPModel model = mf.model();
  const BoundConfig bc = cfg.bound_config(model_lipschitz(cfg, mf, model));
  const SimResult sim = simulate_stage(cfg, model, bc);
  report_feasibility(sim);
  write_output(output_path(cfg, "trajectory.csv"), trajectory_csv(sim, header_for("simulate", cfg)));
  return kOk;
}

int cmd_assess(const GlobalOptions& g, const std::string& model_path) {
  const ExperimentConfig cfg = resolve_config(g);
  const ModelFile mf = load_model_file(model_path.empty() ? output_path(cfg, "model.json") : fs::path(model_path));
  const GPModel model = mf.model();
  const BoundConfig bc = cfg.bound_config(model_lipschitz(cfg, mf, model));
  const QualityConfig q = cfg.quality_config(mf.data);
  const AssessResult a = assess_stage(cfg, model, bc, q, nullptr);
  write_output(output_path(cfg, "rho_field.csv"), rho_field_csv(a.field, header_for("assess", cfg)));
  return kOk;
}

int cmd_reproduce(const GlobalOptions& g) {
  const ExperimentConfig cfg = resolve_config(g);
  const ExperimentResult r = run_experiment(cfg);
  ModelFile mf;
  mf.h = r.fit.h;
  mf.prior_id = cfg.prior;
  mf.f_hat = cfg.f_hat;
  mf.g_hat = cfg.g_hat;
  mf.data = r.data;
  mf.lipschitz = r.lipschitz;
  write_output(output_path(cfg, "training_set.csv"), training_set_csv(r.data, data_header(cfg)));
  write_output(output_path(cfg, "model.json"), model_json(mf, header_for("fit", cfg)));
  write_output(output_path(cfg, "trajectory.csv"), trajectory_csv(r.sim, header_for("simulate", cfg)));
  write_output(output_path(cfg, "rho_field.csv"), rho_field_csv(r.assess.field, header_for("assess", cfg)));
  write_output(output_path(cfg, "rho_reference.csv"),
               rho_reference_csv(r.assess.reference, header_for("reproduce", cfg)));
  write_output(output_path(cfg, "summary.json"), summary_json(r.summary, header_for("reproduce", cfg)));
  report_feasibility(r.sim);
  const auto& s = r.summary;
  std::cout << "containment_fraction " << format_double(s.containment_fraction) << "\n"
            << "max_radius " << format_double(s.max_radius) << "\n"
            << "max_err_lambda " << format_double(s.max_err_lambda) << "\n"
            << "rho_f_radius_rank_correlation " << format_double(s.rho_f_radius_correlation) << "\n"
            << "rho_g_radius_rank_correlation " << format_double(s.rho_g_radius_correlation) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-data quality assessment for GP-based tracking control"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_option("--grid", g.grid, "Assessment grid resolution per axis (overrides the config)");

  std::string data_path;
  std::string model_path;
  auto* generate = app.add_subcommand("generate", "Simulate data collection and write training_set.csv");
  auto* fit = app.add_subcommand("fit", "Fit GP hyperparameters and write model.json");
  fit->add_option("--data", data_path, "Training-set CSV (default: <out>/training_set.csv)");
  auto* simulate = app.add_subcommand("simulate", "Closed-loop simulation with ultimate bound, writes trajectory.csv");
  simulate->add_option("--model", model_path, "Model file (default: <out>/model.json)");
  auto* assess = app.add_subcommand("assess", "Evaluate rho-gaps on the state grid, writes rho_field.csv");
  assess->add_option("--model", model_path, "Model file (default: <out>/model.json)");
  auto* reproduce = app.add_subcommand("reproduce", "Run the full pipeline and write every artifact plus summary.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*generate) return cmd_generate(g);
    if (*fit) return cmd_fit(g, data_path);
    if (*simulate) return cmd_simulate(g, model_path);
    if (*assess) return cmd_assess(g, model_path);
    if (*reproduce) return cmd_reproduce(g);
  } catch (const ConfigError& e) {
    std::cerr << "rhogap: config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "rhogap: data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "rhogap: numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const ArgumentError& e) {
    std::cerr << "rhogap: invalid argument: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "rhogap: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
