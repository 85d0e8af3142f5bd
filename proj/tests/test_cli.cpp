#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace rhogap;
using testing_support::vec2;

namespace {

namespace fs = std::filesystem;

const char* kSmallConfig =
    "[datagen]\nn = 200\nhorizon = 6\n"
    "[gp]\nrestarts = 2\nlipschitz_grid = 21\n"
    "[sim]\nhorizon = 3\nrecord_stride = 20\n"
    "[assess]\ngrid = 12\n";

struct CliRun {
  int code;
  std::string err;
};

fs::path workdir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rhogap_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CliRun run(const fs::path& dir, const std::string& args) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + RHOGAP_CLI_PATH + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                          "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(err)};
}

fs::path small_config(const fs::path& dir, const std::string& extra = "") {
  const fs::path p = dir / "small.ini";
  std::ofstream(p) << kSmallConfig << extra;
  return p;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Cli, GenerateWritesDefaultSizedTable) {
  const auto dir = workdir("generate");
  const CliRun r = run(dir, "--out " + (dir / "o").string() + " generate");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = read_file(dir / "o" / "training_set.csv");
  const auto rows = csv_rows(text);
  ASSERT_EQ(rows.size(), 1001u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"x1", "x2", "u", "y"}));
  EXPECT_NE(text.find("# seed: 1"), std::string::npos);
  EXPECT_NE(text.find("# config_fingerprint: "), std::string::npos);
  EXPECT_NE(text.find("# generator_gain: 100"), std::string::npos);
}

TEST(Cli, SeedOverrideIsDeterministic) {
  const auto dir = workdir("seed");
  const auto cfg = small_config(dir);
  ASSERT_EQ(run(dir, "--config " + cfg.string() + " --seed 7 --out " + (dir / "a").string() + " generate").code, 0);
  ASSERT_EQ(run(dir, "--config " + cfg.string() + " --seed 7 --out " + (dir / "b").string() + " generate").code, 0);
  ASSERT_EQ(run(dir, "--config " + cfg.string() + " --seed 8 --out " + (dir / "c").string() + " generate").code, 0);
  const std::string a = read_file(dir / "a" / "training_set.csv");
  EXPECT_EQ(a, read_file(dir / "b" / "training_set.csv"));
  EXPECT_NE(a, read_file(dir / "c" / "training_set.csv"));
  EXPECT_NE(a.find("# seed: 7"), std::string::npos);
}

TEST(Cli, InvalidConfigKeyExitsWithTwo) {
  const auto dir = workdir("badkey");
  const fs::path cfg = dir / "bad.ini";
  std::ofstream(cfg) << "[control]\ngain = 3\n";
  const CliRun r = run(dir, "--config " + cfg.string() + " generate");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("control.gain"), std::string::npos) << r.err;
}

TEST(Cli, BadArgumentsExitWithTwo) {
  const auto dir = workdir("badargs");
  EXPECT_EQ(run(dir, "--grid notanumber assess").code, 2);
  EXPECT_EQ(run(dir, "frobnicate").code, 2);
}

TEST(Cli, EmptyDatasetExitsWithThree) {
  const auto dir = workdir("empty");
  std::ofstream(dir / "empty.csv") << "x1,x2,u,y\n";
  const CliRun r = run(dir, "--out " + (dir / "o").string() + " fit --data " + (dir / "empty.csv").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("insufficient data"), std::string::npos) << r.err;
}

TEST(Cli, FittedModelReloadsWithSamePosterior) {
  const auto dir = workdir("fit");
  const auto cfg = small_config(dir);
  const std::string out = (dir / "o").string();
  ASSERT_EQ(run(dir, "--config " + cfg.string() + " --out " + out + " generate").code, 0);
  const CliRun r = run(dir, "--config " + cfg.string() + " --out " + out + " fit");
  ASSERT_EQ(r.code, 0) << r.err;

  const ExperimentConfig c = load_config(cfg.string());
  const TrainingSet d = load_training_set(dir / "o" / "training_set.csv", c.noise_variance());
  const FitResult fr = fit(d, c.initial_hyperparameters(), c.box, c.fit);
  const GPModel direct(d, fr.h, c.system().prior);
  const ModelFile mf = load_model_file(dir / "o" / "model.json");
  ASSERT_TRUE(mf.lipschitz.has_value());
  const GPModel loaded = mf.model();
  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> U(-2.5, 2.5);
  for (int i = 0; i < 10; ++i) {
    const InputPoint z{vec2(U(rng), U(rng)), U(rng)};
    EXPECT_NEAR(loaded.posterior(z).mean, direct.posterior(z).mean, 1e-10);
    EXPECT_NEAR(loaded.posterior(z).variance, direct.posterior(z).variance, 1e-10);
  }

  // Idempotent: a second fit writes the same model.
  const std::string first = read_file(dir / "o" / "model.json");
  ASSERT_EQ(run(dir, "--config " + cfg.string() + " --out " + out + " fit").code, 0);
  EXPECT_EQ(first, read_file(dir / "o" / "model.json"));
}

TEST(Cli, AssessOnEmptyModelFlagsInfiniteFillDistance) {
  const auto dir = workdir("assess_empty");
  ModelFile m;
  m.h = {4.0, 4.0, 2.0, 2.0, 0.25};
  m.g_hat = 20.0;
  m.data = TrainingSet(2, 0.25);
  write_file_atomic(dir / "model.json", model_json(m, FileHeader{}));
  const CliRun r = run(dir, "--out " + (dir / "o").string() + " --grid 9 assess --model " + (dir / "model.json").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(read_file(dir / "o" / "rho_field.csv"));
  ASSERT_GT(rows.size(), 10u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][2], "inf");
    EXPECT_EQ(rows[i][3], "inf");
    EXPECT_EQ(rows[i][8], "inf");
    EXPECT_EQ(rows[i][9], "inf");
  }
}

TEST(Cli, TinyGainSimulationIsInfeasibleButSucceeds) {
  const auto dir = workdir("tiny_gain");
  const auto cfg = small_config(dir, "[control]\nk_c = 0.01\n");
  const std::string out = (dir / "o").string();
  ASSERT_EQ(run(dir, "--config " + cfg.string() + " --out " + out + " generate").code, 0);
  ASSERT_EQ(run(dir, "--config " + cfg.string() + " --out " + out + " fit").code, 0);
  const CliRun r = run(dir, "--config " + cfg.string() + " --out " + out + " simulate");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  const auto rows = csv_rows(read_file(dir / "o" / "trajectory.csv"));
  ASSERT_GT(rows.size(), 2u);
  ASSERT_EQ(rows[0].back(), "feasible");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i].back(), "0");
}

TEST(Cli, ReproduceWritesEveryArtifact) {
  const auto dir = workdir("reproduce");
  const auto cfg = small_config(dir);
  const CliRun r = run(dir, "--config " + cfg.string() + " --out " + (dir / "o").string() + " reproduce");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"training_set.csv", "model.json", "trajectory.csv", "rho_field.csv", "rho_reference.csv",
                        "summary.json"})
    EXPECT_TRUE(fs::exists(dir / "o" / f)) << f;
  const std::string out = read_file(dir / "stdout.txt");
  EXPECT_NE(out.find("containment_fraction"), std::string::npos);
}
