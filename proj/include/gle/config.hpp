#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gle/dynamics.hpp"
#include "gle/kernel.hpp"
#include "gle/potential.hpp"

namespace gle {

/// Subcommand-specific settings; each subcommand reads only its own keys.
struct ExperimentConfig {
  // kernel
  double kernel_t_lo = 0.01;
  double kernel_t_hi = 1000.0;
  std::size_t kernel_points = 200;
  double fit_t_lo = 10.0;
  double fit_t_hi = 1000.0;
  // simulate, coupling
  double x0 = 0.0;
  double v0 = 0.0;
  bool store_modes = true;
  // msd, invariance
  std::size_t n_traj = 1000;
  std::size_t n_record = 60;
  std::optional<double> window_lo;
  std::optional<double> window_hi;
  std::vector<double> checkpoints{0.0, 1.0, 5.0};
  bool zero_modes = false;
  // stationarity
  std::size_t record_every = 10;
  // measure
  std::size_t n_samples = 10000;
  // coupling
  std::optional<double> lambda;  // default lambda_1 + 1
  std::optional<double> kappa;   // unset = auto
  std::size_t n_runs = 10;
  double xbar0 = 1.0;
  double vbar0 = 0.0;
  double eta = 1.0;
  double cost_R = 1.0;
  bool plot_scripts = false;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct RunConfig {
  KernelSpec kernel;
  bool enforce_regime = true;
  Potential potential = Potential::harmonic(1.0);
  /// m and gamma live here too; integrator.seed mirrors `seed` and is not
  /// part of equality.
  SimConfig integrator;
  ExperimentConfig experiment;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";
};

bool operator==(const RunConfig& a, const RunConfig& b);

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownKey, TypeMismatch, Constraint, Regime, Missing };

  ConfigError(Kind kind, std::string key, std::string message, int line = 0, int column = 0);

  Kind kind() const noexcept { return kind_; }
  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Kind kind_;
  std::string key_;
  std::string detail_;
  int line_;
  int column_;
};

const char* to_string(ConfigError::Kind kind) noexcept;

/// Parses TOML text. Unknown keys, wrong types, out-of-range values and (with
/// kernel.enforce_regime) regime violations throw ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical TOML text; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& cfg);

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

}  // namespace gle
