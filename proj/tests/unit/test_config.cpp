#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gle/config.hpp"
#include "gle/runner.hpp"

using namespace gle;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
seed = 7
[kernel]
alpha = 1.5
beta = 3
n_modes = 3
s = 0.6
[physics]
m = 1
gamma = 1
potential = {type = "harmonic", k = 1}
)";

ConfigError::Kind error_kind(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return ConfigError::Kind::Syntax;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("gle_config_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Config, MinimalWithDefaults) {
  const auto c = parse_config(kMinimal);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.kernel.n_modes, 3u);
  EXPECT_EQ(c.potential.kind(), Potential::Kind::Harmonic);
  EXPECT_EQ(c.integrator.scheme, Scheme::SplittingExactOU);
  EXPECT_EQ(c.integrator.dt, SimConfig{}.dt);
  EXPECT_EQ(c.experiment, ExperimentConfig{});
  EXPECT_TRUE(c.enforce_regime);
}

TEST(Config, RoundTrip) {
  auto c = parse_config(std::string(kMinimal) + R"(
[integrator]
dt = 0.001
t_final = 12.5
scheme = "multirate_ou"
thin_stride = 3
cutoff_R = 2.5
multirate_tol = 0.02
[experiment]
checkpoints = [0, 0.5, 3]
kappa = 123.456
lambda = 2.5
window_lo = 3
n_traj = 17
x0 = 0.1
zero_modes = true
plot_scripts = true
)");
  EXPECT_EQ(parse_config(emit_config(c)), c);
  c.potential = Potential::even_polynomial({0.1, 0.0, -1.0 / 3.0, 0.0, 0.7});
  c.integrator.dt = 0.1 + 0.2;
  c.experiment.kappa.reset();
  c.seed.reset();
  const auto text = emit_config(c);
  EXPECT_EQ(parse_config(text), c);
  EXPECT_EQ(emit_config(parse_config(text)), text);
  c.potential = Potential::double_well(2.0, 0.5);
  EXPECT_EQ(parse_config(emit_config(c)), c);
  c.potential = Potential::zero();
  c.enforce_regime = false;
  EXPECT_EQ(parse_config(emit_config(c)), c);
}

TEST(Config, KappaAuto) {
  const auto c = parse_config(std::string(kMinimal) + "[experiment]\nkappa = \"auto\"\n");
  EXPECT_FALSE(c.experiment.kappa.has_value());
  EXPECT_EQ(error_kind(std::string(kMinimal) + "[experiment]\nkappa = \"big\"\n"),
            ConfigError::Kind::TypeMismatch);
}

TEST(Config, NegativeAlphaNamesField) {
  std::string text = kMinimal;
  text.replace(text.find("alpha = 1.5"), 11, "alpha = -1");
  try {
    parse_config(text);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ConfigError::Kind::Constraint);
    EXPECT_EQ(e.key(), "kernel.alpha");
    EXPECT_NE(std::string(e.what()).find("alpha > 0"), std::string::npos);
    EXPECT_GT(e.line(), 0);
  }
}

TEST(Config, RegimeEnforcement) {
  std::string text = kMinimal;
  text.replace(text.find("alpha = 1.5"), 11, "alpha = 0.5");
  text.replace(text.find("beta = 3"), 8, "beta = 1");
  try {
    parse_config(text);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ConfigError::Kind::Regime);
    EXPECT_NE(std::string(e.what()).find("(SD)"), std::string::npos);
  }
  text.replace(text.find("s = 0.6"), 7, "s = 0.6\nenforce_regime = false");
  EXPECT_NO_THROW(parse_config(text));
}

TEST(Config, FailsClosed) {
  using K = ConfigError::Kind;
  EXPECT_EQ(error_kind(std::string(kMinimal) + "[integrator]\ndtt = 0.1\n"), K::UnknownKey);
  EXPECT_EQ(error_kind(std::string(kMinimal) + "colour = 1\n"), K::UnknownKey);
  EXPECT_EQ(error_kind(std::string(kMinimal) + "[integrator]\ndt = \"fast\"\n"), K::TypeMismatch);
  EXPECT_EQ(error_kind(std::string(kMinimal) + "[integrator]\nscheme = \"rk4\"\n"), K::Constraint);
  EXPECT_EQ(error_kind(std::string(kMinimal) + "[integrator]\ndt = 2\nt_final = 1\n"), K::Constraint);
  EXPECT_EQ(error_kind("seed = [\n"), K::Syntax);
  std::string bad_pot = kMinimal;
  bad_pot.replace(bad_pot.find("k = 1}"), 6, "k = 1, q = 2}");
  EXPECT_EQ(error_kind(bad_pot), K::UnknownKey);
}

TEST(Config, FormatDoubleRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 12345.678, 2.0}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(Runner, SeedIsMandatory) {
  auto c = parse_config(kMinimal);
  c.seed.reset();
  c.output_dir = scratch("noseed").string();
  std::ostringstream log;
  try {
    run_subcommand("kernel", c, 1, log);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ConfigError::Kind::Missing);
  }
}

TEST(Runner, KernelArtifacts) {
  auto c = parse_config(kMinimal);
  c.output_dir = scratch("kernel").string();
  std::ostringstream log;
  const auto files = run_subcommand("kernel", c, 1, log);
  const fs::path dir = c.output_dir;
  ASSERT_TRUE(fs::exists(dir / "kernel.csv"));
  const auto summary = nlohmann::json::parse(slurp(dir / "kernel.json"));
  EXPECT_EQ(summary["regime"]["tag"], "Diffusive");
  const auto csv = slurp(dir / "kernel.csv");
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,K,tail_bound");
  EXPECT_NE(std::find(files.begin(), files.end(), "manifest.json"), files.end());
}

TEST(Runner, RerunsAreByteIdenticalAndReplayable) {
  const std::string text = std::string(kMinimal) + R"(
[integrator]
dt = 0.01
t_final = 2
thin_stride = 10
[experiment]
n_traj = 50
n_runs = 3
n_samples = 1000
checkpoints = [0, 1]
)";
  for (const std::string name : {"kernel", "simulate", "measure", "invariance", "coupling"}) {
    const fs::path a_dir = scratch(name + "_a"), b_dir = scratch(name + "_b"), c_dir = scratch(name + "_c");
    auto c = parse_config(text);
    std::ostringstream log;
    c.output_dir = a_dir.string();
    const auto files = run_subcommand(name, c, 1, log);
    c.output_dir = b_dir.string();
    run_subcommand(name, c, 2, log);
    // Replay from the manifest alone.
    const auto manifest = nlohmann::json::parse(slurp(a_dir / "manifest.json"));
    auto replay = parse_config(manifest["config_toml"].get<std::string>());
    replay.output_dir = c_dir.string();
    run_subcommand(name, replay, 1, log);
    for (const auto& f : files) {
      if (fs::path(f).extension() != ".csv") continue;
      const auto a = slurp(a_dir / f);
      EXPECT_FALSE(a.empty()) << name << "/" << f;
      EXPECT_EQ(a, slurp(b_dir / f)) << name << "/" << f;
      EXPECT_EQ(a, slurp(c_dir / f)) << name << "/" << f;
    }
  }
}
