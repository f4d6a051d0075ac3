#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gle/kernel.hpp"
#include "gle/potential.hpp"
#include "gle/rng.hpp"

namespace gle {

/// Truncated phase point (x, v, z_1..z_N).
struct State {
  double x = 0.0;
  double v = 0.0;
  std::vector<double> z;

  State() = default;
  State(double x0, double v0, std::vector<double> modes) : x(x0), v(v0), z(std::move(modes)) {}
  explicit State(std::size_t n_modes) : z(n_modes, 0.0) {}

  std::size_t n_modes() const noexcept { return z.size(); }
  bool finite() const noexcept;

  friend bool operator==(const State&, const State&) = default;
};

enum class Scheme {
  EulerMaruyama,
  /// Euler step for (x, v); exact Ornstein-Uhlenbeck transition for each z_k
  /// with v frozen across the step.
  SplittingExactOU,
  /// Same (x, v) step, but the modes are advanced in the shifted coordinates
  /// y_k = z_k - sqrt(c_k) x, whose drift is O(lambda_k); slow modes are
  /// updated every 2^j steps with an exact OU transition driven by the
  /// interval average of x.
  MultiRateOU,
};

std::string_view to_string(Scheme s) noexcept;
/// Accepts "euler_maruyama", "splitting_exact_ou", "multirate_ou".
Scheme parse_scheme(std::string_view name);

struct SimConfig {
  double m = 1.0;
  double gamma = 1.0;
  double dt = 1e-3;
  double t_final = 1.0;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::SplittingExactOU;
  std::size_t thin_stride = 1;
  std::optional<double> cutoff_R;
  /// MultiRateOU only: a mode is updated every 2^j steps with
  /// lambda_k * 2^j * dt <= multirate_tol.
  double multirate_tol = 0.01;

  void validate() const;
  std::size_t n_steps() const;
};

/// Smooth cutoff: 1 on |x| <= R, 0 on |x| >= R + 1, C-infinity in between.
double cutoff_theta(double x, double R) noexcept;

struct Increment {
  double dx = 0.0;
  double dv = 0.0;
  std::vector<double> dz;
};

/// Deterministic drift (dx, dv, dz) of the truncated system.
Increment drift(const State& state, const ModeSet& modes, const Potential& p,
                const SimConfig& cfg);

/// x, v as given; z_k i.i.d. standard normal from the stream seeded by mode_seed.
State init_state(double x0, double v0, std::uint64_t mode_seed, std::size_t n_modes);

class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(double t, std::size_t step_index);
  double time() const noexcept { return t_; }
  std::size_t step_index() const noexcept { return step_; }

 private:
  double t_;
  std::size_t step_;
};

/// Advances one trajectory. Per-step draws are taken in a fixed order: the
/// velocity noise first, then the mode noises in increasing k.
class Propagator {
 public:
  Propagator(const ModeSet& modes, const Potential& potential, const SimConfig& cfg,
             State initial);

  /// One step of size dt. Throws BlowUpError on a non-finite state.
  void step(RngStream& rng);

  double time() const noexcept { return static_cast<double>(steps_) * cfg_.dt; }
  std::size_t steps_taken() const noexcept { return steps_; }
  double x() const noexcept { return x_; }
  double v() const noexcept { return v_; }
  /// Full state; for MultiRateOU the modes are reconstructed from y.
  State state() const;

 private:
  struct Group {
    std::size_t stride = 1;
    std::size_t begin = 0;
    std::size_t end = 0;
    double x_integral = 0.0;
    double weighted_sum = 0.0;  // sum of sqrt(c_k) y_k over the group
  };

  double force(double x, double v, double mode_force) const noexcept;
  void step_em(RngStream& rng);
  void step_split(RngStream& rng);
  void step_multirate(RngStream& rng);
  void setup_multirate();

  ModeSet modes_;
  Potential potential_;
  SimConfig cfg_;
  std::size_t steps_ = 0;

  double x_ = 0.0;
  double v_ = 0.0;
  std::vector<double> w_;  // z (EM, splitting) or y (multirate)

  std::vector<double> sqrt_c_;
  std::vector<double> decay_;
  std::vector<double> gain_;
  std::vector<double> noise_sd_;
  double v_noise_sd_ = 0.0;

  std::vector<Group> groups_;
  std::size_t active_groups_ = 0;
  double mass_ = 0.0;  // sum c_k
};

/// Single-step convenience over Propagator.
State step(const State& state, const ModeSet& modes, const Potential& p, const SimConfig& cfg,
           RngStream& rng);

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;  // z left empty when modes are not stored
  std::uint64_t seed_used = 0;
  /// max of ||X(t)||_{-s}^2 over the recorded times
  double sup_norm_sq = 0.0;
};

struct SimulateOptions {
  double s = 0.6;  // weight for the sup-norm diagnostic only
  bool store_modes = true;
  std::uint64_t trajectory_index = 0;
};

/// Observer invoked at t = 0 and every thin_stride steps (and at t_final).
using Observer = std::function<void(double t, const Propagator&)>;

/// Runs a path from `initial`, calling `observe` at recorded times.
/// Returns the number of steps taken.
std::size_t run_path(State initial, const ModeSet& modes, const Potential& p,
                     const SimConfig& cfg, RngStream& rng, const Observer& observe);

Trajectory simulate(const State& initial, const ModeSet& modes, const Potential& p,
                    const SimConfig& cfg, const SimulateOptions& opts = {});

/// Draws z(0) ~ N(0, I) from the config seed, then simulates.
Trajectory simulate(double x0, double v0, const ModeSet& modes, const Potential& p,
                    const SimConfig& cfg, const SimulateOptions& opts = {});

/// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must only touch
/// data owned by index i.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace gle
