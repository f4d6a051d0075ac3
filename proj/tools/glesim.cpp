#include <cstdint>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "gle/config.hpp"
#include "gle/runner.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned threads = 1;
  std::optional<double> lambda;
  std::optional<std::string> kappa;
  std::optional<std::size_t> n_runs;
};

gle::RunConfig resolve(const Flags& f) {
  auto cfg = gle::load_config(f.config);
  if (f.seed) {
    if (*f.seed > static_cast<std::uint64_t>(INT64_MAX)) {
      throw gle::ConfigError(gle::ConfigError::Kind::Constraint, "seed",
                             "must fit in a signed 64-bit integer");
    }
    cfg.seed = *f.seed;
  }
  if (f.out) cfg.output_dir = *f.out;
  if (f.lambda) cfg.experiment.lambda = *f.lambda;
  if (f.kappa) {
    if (*f.kappa == "auto") {
      cfg.experiment.kappa.reset();
    } else {
      try {
        std::size_t used = 0;
        const double k = std::stod(*f.kappa, &used);
        if (used != f.kappa->size() || !(k > 0.0)) throw std::invalid_argument("kappa");
        cfg.experiment.kappa = k;
      } catch (const std::exception&) {
        throw gle::ConfigError(gle::ConfigError::Kind::TypeMismatch, "--kappa",
                               "expected a positive number or \"auto\"");
      }
    }
  }
  if (f.n_runs) {
    if (*f.n_runs == 0) {
      throw gle::ConfigError(gle::ConfigError::Kind::Constraint, "--n-runs", "must be >= 1");
    }
    cfg.experiment.n_runs = *f.n_runs;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-mode generalized Langevin equation experiments"};
  app.set_version_flag("--version", gle::version());
  app.require_subcommand(1);

  const std::map<std::string, std::string> about{
      {"kernel", "evaluate K_N on a grid, tail bound and log-log tail fit"},
      {"simulate", "one trajectory from (x0, v0) with z(0) ~ N(0, I)"},
      {"msd", "free-particle mean squared displacement and its slope"},
      {"stationarity", "long-path marginals of x and v against the Gibbs measure"},
      {"invariance", "ensemble started from exact Gibbs samples, moments at checkpoints"},
      {"measure", "Gibbs samples and Lyapunov drift constants"},
      {"coupling", "controlled coupled pair: contraction, Girsanov cost, survival"},
  };

  Flags flags;
  for (const auto& name : gle::subcommands()) {
    const auto it = about.find(name);
    auto* sub = app.add_subcommand(name, it == about.end() ? std::string() : it->second);
    sub->add_option("--config", flags.config, "TOML run configuration")->required();
    sub->add_option("--seed", flags.seed, "master seed (overrides the config)");
    sub->add_option("--out", flags.out, "output directory (overrides the config)");
    sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
    if (name == "coupling") {
      sub->add_option("--lambda", flags.lambda, "control rate, must exceed every lambda_k");
      sub->add_option("--kappa", flags.kappa, "Girsanov budget: a number or auto");
      sub->add_option("--n-runs", flags.n_runs, "number of coupled runs");
    }
  }
  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  std::string out_dir = flags.out.value_or("");
  try {
    const auto cfg = resolve(flags);
    out_dir = cfg.output_dir;
    const auto files = gle::run_subcommand(name, cfg, flags.threads, std::cerr);
    for (const auto& f : files) std::cout << cfg.output_dir << "/" << f << "\n";
    return 0;
  } catch (const gle::ConfigError& e) {
    if (!out_dir.empty()) gle::write_error_json(out_dir, e);
    std::cerr << gle::error_json(e) << "\n";
    return 2;
  } catch (const std::exception& e) {
    if (!out_dir.empty()) gle::write_error_json(out_dir, e);
    std::cerr << gle::error_json(e) << "\n";
    return 1;
  }
}
