#include "gle/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "gle/measure.hpp"

namespace gle {

bool State::finite() const noexcept {
  if (!std::isfinite(x) || !std::isfinite(v)) return false;
  return std::all_of(z.begin(), z.end(), [](double q) { return std::isfinite(q); });
}

std::string_view to_string(Scheme s) noexcept {
  switch (s) {
    case Scheme::EulerMaruyama: return "euler_maruyama";
    case Scheme::SplittingExactOU: return "splitting_exact_ou";
    case Scheme::MultiRateOU: break;
  }
  return "multirate_ou";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "euler_maruyama") return Scheme::EulerMaruyama;
  if (name == "splitting_exact_ou") return Scheme::SplittingExactOU;
  if (name == "multirate_ou") return Scheme::MultiRateOU;
  throw std::invalid_argument("unknown scheme '" + std::string(name) +
                              "' (expected euler_maruyama, splitting_exact_ou or multirate_ou)");
}

void SimConfig::validate() const {
  if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("integrator: m must be > 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("integrator: gamma must be >= 0");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("integrator: dt must be > 0");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) {
    throw std::invalid_argument("integrator: t_final must be > 0");
  }
  if (dt > t_final * (1.0 + 1e-12)) {
    throw std::invalid_argument("integrator: dt must not exceed t_final");
  }
  if (scheme == Scheme::EulerMaruyama && gamma > 0.0 && !(dt < m / gamma)) {
    throw std::invalid_argument("integrator: Euler-Maruyama needs dt < m / gamma");
  }
  if (thin_stride == 0) throw std::invalid_argument("integrator: thin_stride must be >= 1");
  if (cutoff_R && !(*cutoff_R > 0.0)) throw std::invalid_argument("integrator: cutoff_R must be > 0");
  if (!(multirate_tol > 0.0)) throw std::invalid_argument("integrator: multirate_tol must be > 0");
}

std::size_t SimConfig::n_steps() const {
  const double n = std::round(t_final / dt);
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

double cutoff_theta(double x, double R) noexcept {
  const double ax = std::abs(x);
  if (ax <= R) return 1.0;
  if (ax >= R + 1.0) return 0.0;
  auto bump = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  const double u = ax - R;
  const double a = bump(1.0 - u);
  return a / (a + bump(u));
}

Increment drift(const State& state, const ModeSet& modes, const Potential& p,
                const SimConfig& cfg) {
  if (state.n_modes() != modes.size()) {
    throw std::invalid_argument("drift: state has " + std::to_string(state.n_modes()) +
                                " modes but the mode set has " + std::to_string(modes.size()));
  }
  Increment inc;
  inc.dx = state.v;
  double mode_force = 0.0;
  inc.dz.resize(modes.size());
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double sc = std::sqrt(modes.c[k]);
    mode_force += sc * state.z[k];
    inc.dz[k] = -modes.lambda[k] * state.z[k] + sc * state.v;
  }
  const double theta = cfg.cutoff_R ? cutoff_theta(state.x, *cfg.cutoff_R) : 1.0;
  inc.dv = (-cfg.gamma * state.v - p.dphi(state.x) * theta - mode_force) / cfg.m;
  return inc;
}

State init_state(double x0, double v0, std::uint64_t mode_seed, std::size_t n_modes) {
  if (n_modes == 0) throw std::invalid_argument("init_state: N must be at least 1");
  RngStream rng(mode_seed);
  State s(x0, v0, std::vector<double>(n_modes));
  for (auto& q : s.z) q = rng.normal();
  return s;
}

BlowUpError::BlowUpError(double t, std::size_t step_index)
    : std::runtime_error("non-finite state at t = " + std::to_string(t) + " (step " +
                         std::to_string(step_index) + "); reduce dt"),
      t_(t),
      step_(step_index) {}

Propagator::Propagator(const ModeSet& modes, const Potential& potential, const SimConfig& cfg,
                       State initial)
    : modes_(modes), potential_(potential), cfg_(cfg) {
  cfg_.validate();
  if (initial.n_modes() != modes.size()) {
    throw std::invalid_argument("Propagator: initial state has " +
                                std::to_string(initial.n_modes()) + " modes, expected " +
                                std::to_string(modes.size()));
  }
  x_ = initial.x;
  v_ = initial.v;
  w_ = std::move(initial.z);

  const std::size_t n = modes.size();
  const double dt = cfg_.dt;
  sqrt_c_.resize(n);
  decay_.resize(n);
  gain_.resize(n);
  noise_sd_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = modes.lambda[k];
    sqrt_c_[k] = std::sqrt(modes.c[k]);
    switch (cfg_.scheme) {
      case Scheme::EulerMaruyama:
        noise_sd_[k] = std::sqrt(2.0 * lam * dt);
        break;
      case Scheme::SplittingExactOU:
        decay_[k] = std::exp(-lam * dt);
        // (1 - e^{-lambda dt}) / lambda, with the lambda -> 0 limit dt
        gain_[k] = lam > 0.0 ? -std::expm1(-lam * dt) / lam : dt;
        noise_sd_[k] = std::sqrt(-std::expm1(-2.0 * lam * dt));
        break;
      case Scheme::MultiRateOU:
        break;
    }
  }
  v_noise_sd_ = std::sqrt(2.0 * cfg_.gamma * dt) / cfg_.m;
  if (cfg_.scheme == Scheme::MultiRateOU) setup_multirate();
}

void Propagator::setup_multirate() {
  const std::size_t n = modes_.size();
  const double dt = cfg_.dt;
  mass_ = kernel_mass(modes_);
  // stride_k = largest power of two with lambda_k * stride * dt <= tol
  std::vector<std::size_t> stride(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t st = 1;
    const double lam = modes_.lambda[k];
    while (st < (std::size_t{1} << 62) && lam * static_cast<double>(2 * st) * dt <= cfg_.multirate_tol) {
      st *= 2;
    }
    stride[k] = st;
  }
  // lambda_k is non-increasing, so strides are non-decreasing and each group
  // is a contiguous block.
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && stride[k] < stride[k - 1]) {
      throw std::invalid_argument("multirate_ou requires non-increasing lambda_k");
    }
    if (groups_.empty() || groups_.back().stride != stride[k]) {
      groups_.push_back(Group{stride[k], k, k + 1, 0.0, 0.0});
    } else {
      groups_.back().end = k + 1;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    decay_[k] = 0.0;
    gain_[k] = 0.0;
    noise_sd_[k] = 0.0;
  }
  for (auto& g : groups_) {
    const double span = static_cast<double>(g.stride) * dt;
    for (std::size_t k = g.begin; k < g.end; ++k) {
      const double lam = modes_.lambda[k];
      decay_[k] = std::exp(-lam * span);
      gain_[k] = -std::expm1(-lam * span);  // 1 - e^{-lambda span}
      noise_sd_[k] = std::sqrt(-std::expm1(-2.0 * lam * span));
      w_[k] -= sqrt_c_[k] * x_;  // z -> y
      g.weighted_sum += sqrt_c_[k] * w_[k];
    }
  }
  const std::size_t total = cfg_.n_steps();
  active_groups_ = 0;
  while (active_groups_ < groups_.size() && groups_[active_groups_].stride <= total) {
    ++active_groups_;
  }
}

State Propagator::state() const {
  State s(x_, v_, w_);
  if (cfg_.scheme == Scheme::MultiRateOU) {
    for (std::size_t k = 0; k < s.z.size(); ++k) s.z[k] += sqrt_c_[k] * x_;
  }
  return s;
}

double Propagator::force(double x, double v, double mode_force) const noexcept {
  const double theta = cfg_.cutoff_R ? cutoff_theta(x, *cfg_.cutoff_R) : 1.0;
  return (-cfg_.gamma * v - potential_.dphi(x) * theta - mode_force) / cfg_.m;
}

void Propagator::step(RngStream& rng) {
  switch (cfg_.scheme) {
    case Scheme::EulerMaruyama: step_em(rng); break;
    case Scheme::SplittingExactOU: step_split(rng); break;
    case Scheme::MultiRateOU: step_multirate(rng); break;
  }
  ++steps_;
}

void Propagator::step_em(RngStream& rng) {
  const double dt = cfg_.dt;
  double mode_force = 0.0;
  for (std::size_t k = 0; k < w_.size(); ++k) mode_force += sqrt_c_[k] * w_[k];
  const double v_old = v_;
  const double x_old = x_;
  const double xi0 = rng.normal();
  v_ = v_old + force(x_old, v_old, mode_force) * dt + v_noise_sd_ * xi0;
  x_ = x_old + v_old * dt;
  double check = 0.0;
  for (std::size_t k = 0; k < w_.size(); ++k) {
    const double zk = w_[k];
    w_[k] = zk + (-modes_.lambda[k] * zk + sqrt_c_[k] * v_old) * dt + noise_sd_[k] * rng.normal();
    check += w_[k];
  }
  if (!std::isfinite(x_) || !std::isfinite(v_) || !std::isfinite(check)) {
    throw BlowUpError(time() + dt, steps_ + 1);
  }
}

void Propagator::step_split(RngStream& rng) {
  const double dt = cfg_.dt;
  double mode_force = 0.0;
  for (std::size_t k = 0; k < w_.size(); ++k) mode_force += sqrt_c_[k] * w_[k];
  const double v_old = v_;
  const double x_old = x_;
  const double xi0 = rng.normal();
  v_ = v_old + force(x_old, v_old, mode_force) * dt + v_noise_sd_ * xi0;
  x_ = x_old + v_old * dt;
  double check = 0.0;
  for (std::size_t k = 0; k < w_.size(); ++k) {
    w_[k] = w_[k] * decay_[k] + sqrt_c_[k] * v_old * gain_[k] + noise_sd_[k] * rng.normal();
    check += w_[k];
  }
  if (!std::isfinite(x_) || !std::isfinite(v_) || !std::isfinite(check)) {
    throw BlowUpError(time() + dt, steps_ + 1);
  }
}

void Propagator::step_multirate(RngStream& rng) {
  const double dt = cfg_.dt;
  double weighted = 0.0;
  for (const auto& g : groups_) weighted += g.weighted_sum;
  // sum_k sqrt(c_k) z_k = sum_k sqrt(c_k) y_k + (sum_k c_k) x
  const double mode_force = weighted + mass_ * x_;
  const double v_old = v_;
  const double x_old = x_;
  const double xi0 = rng.normal();
  v_ = v_old + force(x_old, v_old, mode_force) * dt + v_noise_sd_ * xi0;
  x_ = x_old + v_old * dt;
  const double x_area = 0.5 * (x_old + x_) * dt;
  const std::size_t n_done = steps_ + 1;
  for (std::size_t j = 0; j < active_groups_; ++j) {
    Group& g = groups_[j];
    g.x_integral += x_area;
    if (n_done % g.stride != 0) continue;
    const double x_avg = g.x_integral / (static_cast<double>(g.stride) * dt);
    double sum = 0.0;
    for (std::size_t k = g.begin; k < g.end; ++k) {
      w_[k] = w_[k] * decay_[k] - sqrt_c_[k] * x_avg * gain_[k] + noise_sd_[k] * rng.normal();
      sum += sqrt_c_[k] * w_[k];
    }
    g.weighted_sum = sum;
    g.x_integral = 0.0;
  }
  if (!std::isfinite(x_) || !std::isfinite(v_) || !std::isfinite(weighted)) {
    throw BlowUpError(time() + dt, steps_ + 1);
  }
}

State step(const State& state, const ModeSet& modes, const Potential& p, const SimConfig& cfg,
           RngStream& rng) {
  SimConfig one = cfg;
  one.t_final = std::max(cfg.t_final, cfg.dt);
  Propagator prop(modes, p, one, state);
  prop.step(rng);
  return prop.state();
}

std::size_t run_path(State initial, const ModeSet& modes, const Potential& p,
                     const SimConfig& cfg, RngStream& rng, const Observer& observe) {
  Propagator prop(modes, p, cfg, std::move(initial));
  const std::size_t n = cfg.n_steps();
  if (observe) observe(0.0, prop);
  for (std::size_t i = 1; i <= n; ++i) {
    prop.step(rng);
    if (observe && (i % cfg.thin_stride == 0 || i == n)) observe(prop.time(), prop);
  }
  return n;
}

Trajectory simulate(const State& initial, const ModeSet& modes, const Potential& p,
                    const SimConfig& cfg, const SimulateOptions& opts) {
  Trajectory traj;
  RngStream rng(cfg.seed, StreamDomain::Trajectory, opts.trajectory_index);
  traj.seed_used = cfg.seed;
  const auto weights = norm_weights(modes.size(), opts.s);
  run_path(initial, modes, p, cfg, rng, [&](double t, const Propagator& prop) {
    State s = prop.state();
    traj.sup_norm_sq = std::max(traj.sup_norm_sq, norm_minus_s_sq(s, weights));
    if (!opts.store_modes) s.z.clear();
    traj.times.push_back(t);
    traj.states.push_back(std::move(s));
  });
  return traj;
}

Trajectory simulate(double x0, double v0, const ModeSet& modes, const Potential& p,
                    const SimConfig& cfg, const SimulateOptions& opts) {
  const auto mode_seed =
      derive_stream_seed(cfg.seed, StreamDomain::InitialModes, opts.trajectory_index);
  return simulate(init_state(x0, v0, mode_seed, modes.size()), modes, p, cfg, opts);
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace gle
