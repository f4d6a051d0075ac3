#include "gle/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/beta.hpp>

#include "gle/measure.hpp"

namespace gle {

double default_lambda(const ModeSet& modes) {
  if (modes.empty()) throw std::invalid_argument("default_lambda: empty mode set");
  return *std::max_element(modes.lambda.begin(), modes.lambda.end()) + 1.0;
}

void validate_lambda(const ModeSet& modes, double lambda_ctrl) {
  const double top = modes.empty() ? 0.0
                                   : *std::max_element(modes.lambda.begin(), modes.lambda.end());
  if (!(lambda_ctrl > top) || !std::isfinite(lambda_ctrl)) {
    throw std::invalid_argument("coupling: lambda must exceed every lambda_k (max " +
                                std::to_string(top) + "), got " + std::to_string(lambda_ctrl));
  }
}

double control_u0_diff(double x, double xbar, double vbar, const std::vector<double>& zbar,
                       const ModeSet& modes, const Potential& p, double m, double gamma,
                       double lambda_ctrl) {
  if (!(gamma > 0.0)) throw std::invalid_argument("coupling control needs gamma > 0");
  if (zbar.size() != modes.size()) {
    throw std::invalid_argument("control_u0: difference has the wrong number of modes");
  }
  double mode_sum = 0.0;
  for (std::size_t k = 0; k < zbar.size(); ++k) mode_sum += std::sqrt(modes.c[k]) * zbar[k];
  const double lam = lambda_ctrl;
  const double bracket = (3.0 * lam - gamma / m) * vbar + 2.0 * lam * lam * xbar -
                         p.dphi_difference(x, xbar) / m - mode_sum / m;
  return m / std::sqrt(2.0 * gamma) * bracket;
}

double control_u0(const State& X, const State& Xt, const ModeSet& modes, const Potential& p,
                  double m, double gamma, double lambda_ctrl) {
  if (X.n_modes() != Xt.n_modes()) {
    throw std::invalid_argument("control_u0: states have different mode counts");
  }
  std::vector<double> zbar(X.n_modes());
  for (std::size_t k = 0; k < zbar.size(); ++k) zbar[k] = X.z[k] - Xt.z[k];
  return control_u0_diff(X.x, X.x - Xt.x, X.v - Xt.v, zbar, modes, p, m, gamma, lambda_ctrl);
}

CoupledPair CoupledPair::from_states(const State& X, const State& Xt, double lambda_ctrl,
                                     double kappa) {
  if (X.n_modes() != Xt.n_modes()) {
    throw std::invalid_argument("CoupledPair: states have different mode counts");
  }
  CoupledPair pair;
  pair.primary = X;
  pair.difference = State(X.x - Xt.x, X.v - Xt.v, std::vector<double>(X.n_modes()));
  for (std::size_t k = 0; k < X.n_modes(); ++k) pair.difference.z[k] = X.z[k] - Xt.z[k];
  pair.lambda_ctrl = lambda_ctrl;
  pair.kappa = kappa;
  return pair;
}

State CoupledPair::shifted() const {
  State s(primary.x - difference.x, primary.v - difference.v, primary.z);
  for (std::size_t k = 0; k < s.z.size(); ++k) s.z[k] -= difference.z[k];
  return s;
}

CoupledPath::CoupledPath(const ModeSet& modes, const Potential& potential, const SimConfig& cfg,
                         CoupledPair pair)
    : modes_(modes),
      potential_(potential),
      cfg_(cfg),
      prop_(modes, potential, cfg, pair.primary),
      pair_(std::move(pair)) {
  if (cfg_.scheme == Scheme::MultiRateOU) {
    throw std::invalid_argument("coupling supports euler_maruyama and splitting_exact_ou only");
  }
  if (!(cfg_.gamma > 0.0)) throw std::invalid_argument("coupling control needs gamma > 0");
  if (!(pair_.kappa > 0.0)) throw std::invalid_argument("coupling: kappa must be > 0");
  validate_lambda(modes, pair_.lambda_ctrl);
  if (pair_.difference.n_modes() != modes.size()) {
    throw std::invalid_argument("CoupledPath: difference has the wrong number of modes");
  }
  const std::size_t n = modes.size();
  sqrt_c_.resize(n);
  decay_.resize(n);
  gain_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = modes.lambda[k];
    sqrt_c_[k] = std::sqrt(modes.c[k]);
    decay_[k] = std::exp(-lam * cfg_.dt);
    gain_[k] = lam > 0.0 ? -std::expm1(-lam * cfg_.dt) / lam : cfg_.dt;
  }
}

const CoupledPair& CoupledPath::pair() const {
  pair_.primary = prop_.state();
  return pair_;
}

double CoupledPath::difference_norm_sq(const std::vector<double>& weights) const {
  return norm_minus_s_sq(pair_.difference, weights);
}

void CoupledPath::step(RngStream& rng) {
  const double dt = cfg_.dt;
  const double m = cfg_.m;
  const double x = prop_.x();
  State& d = pair_.difference;

  double u0 = 0.0;
  if (!pair_.stopped) {
    u0 = control_u0_diff(x, d.x, d.v, d.z, modes_, potential_, m, cfg_.gamma, pair_.lambda_ctrl);
  }
  double force_gap = 0.0;
  if (cfg_.cutoff_R) {
    const double R = *cfg_.cutoff_R;
    const double xt = x - d.x;
    force_gap = potential_.dphi(x) * cutoff_theta(x, R) - potential_.dphi(xt) * cutoff_theta(xt, R);
  } else {
    force_gap = potential_.dphi_difference(x, d.x);
  }
  double mode_force = 0.0;
  for (std::size_t k = 0; k < d.z.size(); ++k) mode_force += sqrt_c_[k] * d.z[k];

  prop_.step(rng);

  // X~ receives +sqrt(2 gamma)/m u0 dt in dv, hence the minus sign for Xbar.
  const double shift = std::sqrt(2.0 * cfg_.gamma) / m * u0;
  const double v_old = d.v;
  d.v = v_old + ((-cfg_.gamma * v_old - force_gap - mode_force) / m - shift) * dt;
  d.x = d.x + v_old * dt;
  if (cfg_.scheme == Scheme::EulerMaruyama) {
    for (std::size_t k = 0; k < d.z.size(); ++k) {
      d.z[k] += (-modes_.lambda[k] * d.z[k] + sqrt_c_[k] * v_old) * dt;
    }
  } else {
    for (std::size_t k = 0; k < d.z.size(); ++k) {
      d.z[k] = d.z[k] * decay_[k] + sqrt_c_[k] * v_old * gain_[k];
    }
  }
  last_u0_ = u0;
  if (!pair_.stopped) {
    pair_.girsanov_cost += u0 * u0 * dt;
    if (pair_.girsanov_cost >= pair_.kappa) pair_.stopped = true;
  }
  if (!std::isfinite(d.x) || !std::isfinite(d.v)) throw BlowUpError(time(), prop_.steps_taken());
}

CoupledPair coupled_step(const CoupledPair& pair, const ModeSet& modes, const Potential& p,
                         const SimConfig& cfg, RngStream& rng) {
  SimConfig one = cfg;
  one.t_final = std::max(cfg.t_final, cfg.dt);
  CoupledPath path(modes, p, one, pair);
  path.step(rng);
  return path.pair();
}

DifferenceDiagnostics difference_ode_exact(double xbar0, double vbar0,
                                           const std::vector<double>& zbar0,
                                           const ModeSet& modes, double lambda_ctrl, double t,
                                           double s) {
  if (!(t >= 0.0)) throw std::invalid_argument("difference_ode_exact: t must be >= 0");
  validate_lambda(modes, lambda_ctrl);
  if (zbar0.size() != modes.size()) {
    throw std::invalid_argument("difference_ode_exact: zbar0 has the wrong number of modes");
  }
  const double lam = lambda_ctrl;
  const double e1 = std::exp(-lam * t);
  const double e2 = std::exp(-2.0 * lam * t);
  DifferenceDiagnostics out;
  out.xbar = (2.0 * xbar0 + vbar0 / lam) * e1 - (xbar0 + vbar0 / lam) * e2;
  // vbar(t) = A e^{-lambda t} + B e^{-2 lambda t}
  const double A = -(2.0 * lam * xbar0 + vbar0);
  const double B = 2.0 * (lam * xbar0 + vbar0);
  out.vbar = A * e1 + B * e2;
  out.zbar.resize(modes.size());
  double zn = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double lk = modes.lambda[k];
    const double ek = std::exp(-lk * t);
    const double integral = A * (e1 - ek) / (lk - lam) + B * (e2 - ek) / (lk - 2.0 * lam);
    out.zbar[k] = ek * zbar0[k] + std::sqrt(modes.c[k]) * integral;
    zn += std::pow(static_cast<double>(k + 1), -2.0 * s) * out.zbar[k] * out.zbar[k];
  }
  out.zbar_norm = std::sqrt(zn);
  out.full_norm = std::sqrt(out.xbar * out.xbar + out.vbar * out.vbar + zn);
  return out;
}

namespace {

struct ThetaChoice {
  std::size_t split_N;
  double a;
  bool regime_d;
};

ThetaChoice theta_choice(const KernelSpec& spec, const ModeSet& modes, double m, double gamma) {
  const Regime r = classify_regime(spec);
  if (r.tag == RegimeTag::Diffusive && r.s_in_range) {
    const auto tc = theta_constants(spec, modes, m, gamma);
    return {tc.split_N, tc.a, true};
  }
  // Outside (D) all modes go into the unweighted part.
  return {modes.size(), theta_a(modes, m, gamma, spec.s, modes.size()), false};
}

}  // namespace

CostBound cost_bound(const State& X0, const State& Xbar0, const KernelSpec& spec,
                     const ModeSet& modes, const Potential& p, double m, double gamma,
                     double lambda_ctrl, double R) {
  validate_lambda(modes, lambda_ctrl);
  if (!(gamma > 0.0)) throw std::invalid_argument("cost bound needs gamma > 0");
  const double lam = lambda_ctrl;
  const double s = spec.s;
  CostBound b;
  b.R = R;
  const double ax = std::abs(Xbar0.x);
  const double av = std::abs(Xbar0.v);
  b.C1 = 3.0 * ax + 3.0 * av / lam;
  b.C2 = 4.0 * lam * ax + 4.0 * av;
  const double g = 3.0 * lam - gamma / m;
  b.C3 = 2.0 * m * m / gamma * (g * g * b.C2 * b.C2 + 4.0 * std::pow(lam, 4) * b.C1 * b.C1);

  const auto th = theta_choice(spec, modes, m, gamma);
  b.split_N = th.split_N;
  b.a = th.a;
  b.regime_d = th.regime_d;
  b.theta0 = lyapunov_theta(X0, modes, p, m, s, th.split_N);
  const double q = 1.0;
  b.C4 = std::pow(m * b.theta0 + 2.0 * q * m * th.a / lam + m * R, 2.0 * q);
  const auto fb = make_derivative_bound(p);
  b.f_C1 = fb.f(p, b.C1);
  b.C5 = 4.0 * b.C1 * b.C1 / gamma * (b.f_C1 * b.f_C1 + b.C4);

  double mode_term = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double w = std::pow(static_cast<double>(k + 1), -2.0 * s);
    mode_term += modes.c[k] / (2.0 * modes.lambda[k] * w);
  }
  const auto weights = norm_weights(modes.size(), s);
  const double xbar_norm_sq = norm_minus_s_sq(Xbar0, weights);
  b.kernel_l2 = kernel_l2_squared(modes);
  b.C6 = b.C3 / (2.0 * lam) + 4.0 * xbar_norm_sq / gamma * mode_term +
         4.0 * b.C2 * b.C2 / gamma * b.kernel_l2 + b.C5 / lam;
  b.kappa_auto = 2.0 * b.C6;
  return b;
}

std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double confidence) {
  if (n == 0) throw std::invalid_argument("clopper_pearson: n must be >= 1");
  const double tail = 0.5 * (1.0 - confidence);
  double lo = 0.0;
  double hi = 1.0;
  if (k > 0) {
    boost::math::beta_distribution<double> dist(static_cast<double>(k),
                                                static_cast<double>(n - k + 1));
    lo = boost::math::quantile(dist, tail);
  }
  if (k < n) {
    boost::math::beta_distribution<double> dist(static_cast<double>(k + 1),
                                                static_cast<double>(n - k));
    hi = boost::math::quantile(dist, 1.0 - tail);
  }
  return {lo, hi};
}

CouplingReport run_coupling_experiment(const State& X0, const State& Xt0, const KernelSpec& spec,
                                       const ModeSet& modes, const Potential& p,
                                       const SimConfig& cfg, double lambda_ctrl, double kappa,
                                       const CouplingOptions& opts) {
  cfg.validate();
  validate_lambda(modes, lambda_ctrl);
  if (opts.n_runs == 0) throw std::invalid_argument("coupling: n_runs must be >= 1");
  if (!(opts.eta > 0.0)) throw std::invalid_argument("coupling: eta must be > 0");

  CouplingReport rep;
  const Regime regime = classify_regime(spec);
  rep.regime = regime.tag;
  rep.regime_recommended = regime.tag == RegimeTag::Diffusive && regime.s_in_range;
  rep.lambda_ctrl = lambda_ctrl;
  rep.kappa = kappa;

  const auto th = theta_choice(spec, modes, cfg.m, cfg.gamma);
  const double theta0 = lyapunov_theta(X0, modes, p, cfg.m, spec.s, th.split_N);
  const auto weights = norm_weights(modes.size(), spec.s);
  const std::size_t n_steps = cfg.n_steps();
  const std::size_t stride = opts.curve_stride ? opts.curve_stride : cfg.thin_stride;
  const CoupledPair start = CoupledPair::from_states(X0, Xt0, lambda_ctrl, kappa);

  rep.runs.resize(opts.n_runs);
  parallel_for(opts.n_runs, opts.threads, [&](std::size_t i) {
    CouplingRun& run = rep.runs[i];
    RngStream rng(cfg.seed, StreamDomain::Coupling, i);
    CoupledPath path(modes, p, cfg, start);
    run.initial_norm = std::sqrt(path.difference_norm_sq(weights));
    double sup_scaled = p.phi(path.x()) / cfg.m;
    auto record = [&](double t) {
      run.times.push_back(t);
      run.norms.push_back(std::sqrt(path.difference_norm_sq(weights)));
      run.costs.push_back(path.cost());
    };
    record(0.0);
    for (std::size_t step = 1; step <= n_steps; ++step) {
      const bool was_stopped = path.stopped();
      path.step(rng);
      const double t = path.time();
      if (!was_stopped && path.stopped()) run.stop_time = t;
      sup_scaled = std::max(sup_scaled, std::exp(-opts.eta * t) * p.phi(path.x()) / cfg.m);
      if (step % stride == 0 || step == n_steps) record(t);
    }
    run.final_norm = run.norms.back();
    run.cost = path.cost();
    run.stopped = path.stopped();
    run.sup_scaled_excess = sup_scaled - theta0 - th.a / opts.eta;
  });

  std::size_t survivors = 0;
  std::vector<double> costs;
  std::vector<double> excess;
  for (const auto& run : rep.runs) {
    if (!run.stopped) ++survivors;
    costs.push_back(run.cost);
    excess.push_back(run.sup_scaled_excess);
    if (run.initial_norm > 0.0) {
      rep.max_ratio = std::max(rep.max_ratio, run.final_norm / run.initial_norm);
    }
  }
  const std::size_t n = rep.runs.size();
  rep.never_stopped_fraction = static_cast<double>(survivors) / static_cast<double>(n);
  std::tie(rep.ci_lo, rep.ci_hi) = clopper_pearson(survivors, n, opts.confidence);
  std::sort(costs.begin(), costs.end());
  rep.cost_min = costs.front();
  rep.cost_max = costs.back();
  rep.cost_median = n % 2 ? costs[n / 2] : 0.5 * (costs[n / 2 - 1] + costs[n / 2]);

  const double top = *std::max_element(excess.begin(), excess.end());
  constexpr int levels = 20;
  const double step_r = top > 0.0 ? top / levels : 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int used = 0;
  for (int j = 0; j < levels; ++j) {
    const double r = step_r * j;
    const auto hits = std::count_if(excess.begin(), excess.end(), [r](double e) { return e > r; });
    const double frac = static_cast<double>(hits) / static_cast<double>(n);
    rep.tail_thresholds.push_back(r);
    rep.tail_fractions.push_back(frac);
    if (frac > 0.0 && (j == 0 || step_r > 0.0)) {
      const double y = std::log(frac);
      sx += r; sy += y; sxx += r * r; sxy += r * y;
      ++used;
    }
    if (step_r == 0.0) break;
  }
  const double denom = used * sxx - sx * sx;
  rep.tail_rate = used >= 2 && denom > 0.0 ? -(used * sxy - sx * sy) / denom
                                           : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

}  // namespace gle
