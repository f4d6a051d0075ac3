#include "gle/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gle {

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

double l1_histogram_distance(std::span<const double> samples,
                             const std::function<double(double)>& cdf, double lo, double hi,
                             std::size_t n_bins) {
  if (!(hi > lo) || n_bins == 0) throw std::invalid_argument("histogram: need hi > lo and bins > 0");
  std::vector<std::size_t> counts(n_bins, 0);
  std::size_t outside = 0;
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (double x : samples) {
    if (x < lo || x >= hi) {
      ++outside;
      continue;
    }
    const auto b = std::min(static_cast<std::size_t>((x - lo) / width), n_bins - 1);
    ++counts[b];
  }
  const double n = static_cast<double>(samples.size());
  double dist = 0.0;
  double inside_mass = 0.0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double a = lo + width * static_cast<double>(b);
    const double mass = cdf(a + width) - cdf(a);
    inside_mass += mass;
    dist += std::abs(static_cast<double>(counts[b]) / n - mass);
  }
  dist += std::abs(static_cast<double>(outside) / n - (1.0 - inside_mass));
  return dist;
}

MarginalTest marginal_test(std::span<const double> samples,
                           const std::function<double(double)>& cdf, double lo, double hi,
                           std::size_t n_bins) {
  if (samples.size() < 1000) {
    throw std::invalid_argument("marginal test needs at least 1000 samples, got " +
                                std::to_string(samples.size()));
  }
  MarginalTest out;
  out.n = samples.size();
  out.ks_stat = ks_statistic(std::vector<double>(samples.begin(), samples.end()), cdf);
  out.l1_hist = l1_histogram_distance(samples, cdf, lo, hi, n_bins);
  return out;
}

namespace {

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance_of(std::span<const double> xs) {
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return acc / static_cast<double>(xs.size() - 1);
}

std::vector<double> batch_averages(std::span<const double> series, std::size_t batch) {
  const std::size_t nb = series.size() / batch;
  std::vector<double> out(nb);
  for (std::size_t b = 0; b < nb; ++b) out[b] = mean_of(series.subspan(b * batch, batch));
  return out;
}

}  // namespace

double integrated_autocorrelation_time(std::span<const double> series) {
  if (series.size() < 100) throw std::invalid_argument("autocorrelation time needs >= 100 points");
  const auto batch = static_cast<std::size_t>(std::sqrt(static_cast<double>(series.size())));
  const auto means = batch_averages(series, batch);
  const double var = variance_of(series);
  if (!(var > 0.0)) return 1.0;
  return std::max(1.0, static_cast<double>(batch) * variance_of(means) / var);
}

BatchEstimate batch_means(std::span<const double> series, std::size_t n_batches) {
  if (n_batches < 2 || series.size() < 2 * n_batches) {
    throw std::invalid_argument("batch_means: series too short for the batch count");
  }
  const std::size_t batch = series.size() / n_batches;
  const auto means = batch_averages(series, batch);
  BatchEstimate out;
  out.mean = mean_of(means);
  out.stderr_ = std::sqrt(variance_of(means) / static_cast<double>(means.size()));
  return out;
}

TimeAverage time_average(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size() || times.empty()) {
    throw std::invalid_argument("time_average: times and values must be non-empty and aligned");
  }
  TimeAverage out;
  out.running.resize(times.size());
  out.running[0] = values[0];
  double weighted = 0.0;
  double weight = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double w = 0.5 * (times[i] - times[i - 1]);
    weighted += w * (values[i - 1] + values[i]);
    weight += 2.0 * w;
    out.running[i] = weight > 0.0 ? weighted / weight : values[i];
  }
  out.value = out.running.back();
  return out;
}

void RunningAverage::add(double t, double f) {
  if (!started_) {
    started_ = true;
    t_first_ = t_last_ = t;
    f_last_ = f;
    return;
  }
  const double w = 0.5 * (t - t_last_);
  weighted_ += w * (f_last_ + f);
  weight_ += 2.0 * w;
  t_last_ = t;
  f_last_ = f;
}

double RunningAverage::value() const {
  if (!started_) return std::numeric_limits<double>::quiet_NaN();
  return weight_ > 0.0 ? weighted_ / weight_ : f_last_;
}

std::pair<double, double> default_msd_window(const ModeSet& modes, double t_final,
                                             bool* clamped) {
  const double lam_min = *std::min_element(modes.lambda.begin(), modes.lambda.end());
  double hi = 0.05 / lam_min;
  bool cut = false;
  if (hi > t_final) {
    hi = t_final;
    cut = true;
  }
  if (clamped) *clamped = cut;
  return {10.0, hi};
}

void fit_msd_window(MsdCurve& curve, double lo, double hi) {
  curve.window_lo = lo;
  curve.window_hi = hi;
  std::vector<double> t, y;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    if (curve.times[i] >= lo * (1 - 1e-12) && curve.times[i] <= hi * (1 + 1e-12) &&
        curve.msd[i] > 0.0) {
      t.push_back(curve.times[i]);
      y.push_back(curve.msd[i]);
    }
  }
  curve.points_in_window = t.size();
  if (t.size() < 3) {
    curve.slope = curve.intercept = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const auto fit = fit_loglog(t, y);
  curve.slope = fit.slope;
  curve.intercept = fit.intercept;
}

namespace {

std::vector<std::size_t> record_steps(const SimConfig& cfg, std::size_t n_record) {
  const std::size_t n = cfg.n_steps();
  std::vector<std::size_t> steps;
  for (double t : logspace(cfg.dt, static_cast<double>(n) * cfg.dt, std::max<std::size_t>(n_record, 2))) {
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(t / cfg.dt)), 1, n);
    if (steps.empty() || steps.back() != k) steps.push_back(k);
  }
  return steps;
}

}  // namespace

MsdCurve msd_ensemble(const EnsembleSpec& spec, const ModeSet& modes, const Potential& p,
                      const SimConfig& cfg, std::optional<double> window_lo,
                      std::optional<double> window_hi) {
  if (p.confining()) {
    throw std::invalid_argument(
        "msd: scaling runs need the zero potential (a confining well saturates the MSD)");
  }
  if (spec.n_traj == 0) throw std::invalid_argument("msd: n_traj must be >= 1");
  if (spec.init == EnsembleSpec::Init::FromPoint && !spec.point) {
    throw std::invalid_argument("msd: FromPoint needs an initial state");
  }
  cfg.validate();
  const auto steps = record_steps(cfg, spec.n_record);
  const std::size_t n_rec = steps.size();
  std::vector<double> sq(spec.n_traj * n_rec);

  parallel_for(spec.n_traj, spec.threads, [&](std::size_t i) {
    State init;
    if (spec.init == EnsembleSpec::Init::FromPoint) {
      init = *spec.point;
    } else {
      RngStream r0(cfg.seed, StreamDomain::InitialModes, i);
      init = State(modes.size());
      init.x = spec.x0;
      init.v = r0.normal() / std::sqrt(cfg.m);
      for (auto& q : init.z) q = r0.normal();
    }
    const double x_start = init.x;
    RngStream rng(cfg.seed, StreamDomain::Trajectory, i);
    Propagator prop(modes, p, cfg, std::move(init));
    std::size_t next = 0;
    for (std::size_t k = 1; next < n_rec; ++k) {
      prop.step(rng);
      if (k == steps[next]) {
        const double dx = prop.x() - x_start;
        sq[i * n_rec + next] = dx * dx;
        ++next;
      }
    }
  });

  MsdCurve curve;
  curve.times.resize(n_rec);
  curve.msd.resize(n_rec);
  curve.stderr_.resize(n_rec);
  const double n = static_cast<double>(spec.n_traj);
  for (std::size_t r = 0; r < n_rec; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < spec.n_traj; ++i) sum += sq[i * n_rec + r];
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < spec.n_traj; ++i) {
      const double d = sq[i * n_rec + r] - mean;
      ss += d * d;
    }
    curve.times[r] = static_cast<double>(steps[r]) * cfg.dt;
    curve.msd[r] = mean;
    curve.stderr_[r] = spec.n_traj > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  bool clamped = false;
  auto [lo, hi] = default_msd_window(modes, cfg.t_final, &clamped);
  curve.window_clamped = clamped && !window_hi;
  fit_msd_window(curve, window_lo.value_or(lo), window_hi.value_or(hi));
  return curve;
}

std::vector<double> exact_free_msd(const ModeSet& modes, double m, double gamma,
                                   std::span<const double> times, double h) {
  const std::size_t n = modes.size();
  // y = (w_0, w_1..w_N, I1, I2): w' = A w, I1' = w_0, I2' = I1.
  std::vector<double> sc(n);
  for (std::size_t k = 0; k < n; ++k) sc[k] = std::sqrt(modes.c[k]);
  auto rhs = [&](const std::vector<double>& y, std::vector<double>& dy) {
    double force = -gamma * y[0];
    for (std::size_t k = 0; k < n; ++k) force -= sc[k] * y[k + 1];
    dy[0] = force / m;
    for (std::size_t k = 0; k < n; ++k) dy[k + 1] = -modes.lambda[k] * y[k + 1] + sc[k] * y[0];
    dy[n + 1] = y[0];
    dy[n + 2] = y[n + 1];
  };
  std::vector<double> y(n + 3, 0.0), k1(n + 3), k2(n + 3), k3(n + 3), k4(n + 3), tmp(n + 3);
  y[0] = 1.0 / m;
  auto rk4 = [&](double step) {
    rhs(y, k1);
    for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * step * k1[i];
    rhs(tmp, k2);
    for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * step * k2[i];
    rhs(tmp, k3);
    for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + step * k3[i];
    rhs(tmp, k4);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
  };
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return times[a] < times[b]; });
  std::vector<double> out(times.size());
  double t = 0.0;
  for (auto idx : order) {
    const double target = times[idx];
    if (target < 0.0) throw std::invalid_argument("exact_free_msd: negative time");
    while (t < target) {
      const double step = std::min(h, target - t);
      rk4(step);
      t += step;
      if (target - t < 1e-12 * std::max(1.0, target)) t = target;
    }
    out[idx] = 2.0 * y[n + 2];
  }
  return out;
}

StationarityReport stationarity_test(const ModeSet& modes, const Potential& p,
                                     const SimConfig& cfg, std::size_t record_every) {
  if (record_every == 0) throw std::invalid_argument("stationarity: record_every must be >= 1");
  const GibbsSampler sampler(p, cfg.m, modes.size(), cfg.seed);
  const GibbsMarginal marginal(p);
  RngStream rng(cfg.seed, StreamDomain::Trajectory, 0);
  Propagator prop(modes, p, cfg, sampler.sample(0));
  const std::size_t n = cfg.n_steps();
  std::vector<double> xs, vs, x2, v2;
  xs.reserve(n / record_every + 1);
  vs.reserve(n / record_every + 1);
  for (std::size_t k = 1; k <= n; ++k) {
    prop.step(rng);
    if (k % record_every == 0) {
      xs.push_back(prop.x());
      vs.push_back(prop.v());
    }
  }
  StationarityReport rep;
  rep.n_raw = xs.size();
  x2.resize(xs.size());
  v2.resize(vs.size());
  std::transform(xs.begin(), xs.end(), x2.begin(), [](double x) { return x * x; });
  std::transform(vs.begin(), vs.end(), v2.begin(), [](double v) { return v * v; });
  rep.mean_x2 = batch_means(x2);
  rep.mean_v2 = batch_means(v2);
  rep.target_x2 = marginal.expect([](double x) { return x * x; });
  rep.target_v2 = 1.0 / cfg.m;
  rep.tau_x = integrated_autocorrelation_time(xs);
  rep.tau_v = integrated_autocorrelation_time(vs);
  rep.thin_x = static_cast<std::size_t>(std::ceil(rep.tau_x));
  rep.thin_v = static_cast<std::size_t>(std::ceil(rep.tau_v));
  auto thin = [](const std::vector<double>& src, std::size_t stride) {
    std::vector<double> out;
    for (std::size_t i = 0; i < src.size(); i += stride) out.push_back(src[i]);
    return out;
  };
  const auto tx = thin(xs, rep.thin_x);
  const auto tv = thin(vs, rep.thin_v);
  const double sx = std::sqrt(rep.target_x2);
  const double sv = 1.0 / std::sqrt(cfg.m);
  rep.x_test = marginal_test(tx, [&](double x) { return marginal.cdf(x); }, -4.0 * sx, 4.0 * sx);
  rep.v_test = marginal_test(tv, [&](double v) { return normal_cdf(v, 0.0, sv); }, -4.0 * sv,
                             4.0 * sv);
  rep.x_samples = tx;
  rep.v_samples = tv;
  return rep;
}

InvarianceReport invariance_propagation_test(const ModeSet& modes, const Potential& p,
                                             const SimConfig& cfg, std::size_t n_traj,
                                             std::vector<double> checkpoints,
                                             const InvarianceOptions& opts) {
  if (n_traj < 2) throw std::invalid_argument("invariance: n_traj must be >= 2");
  if (checkpoints.empty()) throw std::invalid_argument("invariance: no checkpoints");
  cfg.validate();
  std::sort(checkpoints.begin(), checkpoints.end());
  std::vector<std::size_t> steps;
  for (double t : checkpoints) {
    if (t < 0.0) throw std::invalid_argument("invariance: negative checkpoint");
    steps.push_back(static_cast<std::size_t>(std::llround(t / cfg.dt)));
  }
  const std::size_t n_cp = steps.size();
  const std::size_t last = steps.back();
  SimConfig run_cfg = cfg;
  run_cfg.t_final = std::max(cfg.dt, static_cast<double>(last) * cfg.dt);

  const GibbsSampler sampler(p, cfg.m, modes.size(), cfg.seed);
  const GibbsMarginal marginal(p);
  constexpr std::size_t n_obs = 4;  // x, v, z_1, z_N
  std::vector<double> obs(n_cp * n_obs * n_traj);
  auto slot = [&](std::size_t cp, std::size_t q, std::size_t i) -> double& {
    return obs[(cp * n_obs + q) * n_traj + i];
  };

  parallel_for(n_traj, opts.threads, [&](std::size_t i) {
    State init = sampler.sample(i);
    if (opts.zero_modes) std::fill(init.z.begin(), init.z.end(), 0.0);
    RngStream rng(cfg.seed, StreamDomain::Trajectory, i);
    Propagator prop(modes, p, run_cfg, std::move(init));
    std::size_t k = 0;
    for (std::size_t cp = 0; cp < n_cp; ++cp) {
      while (k < steps[cp]) {
        prop.step(rng);
        ++k;
      }
      const State s = prop.state();
      slot(cp, 0, i) = s.x;
      slot(cp, 1, i) = s.v;
      slot(cp, 2, i) = s.z.front();
      slot(cp, 3, i) = s.z.back();
    }
  });

  const double ex = marginal.expect([](double x) { return x; });
  const double ex2 = marginal.expect([](double x) { return x * x; });
  const double n = static_cast<double>(n_traj);
  auto moment = [&](std::string name, std::size_t cp, std::size_t q, bool square, double target) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n_traj; ++i) {
      const double u = slot(cp, q, i);
      sum += square ? u * u : u;
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < n_traj; ++i) {
      const double u = slot(cp, q, i);
      const double d = (square ? u * u : u) - mean;
      ss += d * d;
    }
    MomentCheck mc;
    mc.name = std::move(name);
    mc.estimate = mean;
    mc.target = target;
    mc.stderr_ = std::sqrt(ss / (n - 1.0) / n);
    const double gap = mean - target;
    mc.z_score = mc.stderr_ > 0.0 ? gap / mc.stderr_
                                  : (gap == 0.0 ? 0.0 : std::copysign(INFINITY, gap));
    return mc;
  };

  InvarianceReport rep;
  rep.n_traj = n_traj;
  const double sv = 1.0 / std::sqrt(cfg.m);
  for (std::size_t cp = 0; cp < n_cp; ++cp) {
    Checkpoint c;
    c.t = static_cast<double>(steps[cp]) * cfg.dt;
    c.moments.push_back(moment("E[x]", cp, 0, false, ex));
    c.moments.push_back(moment("E[x^2]", cp, 0, true, ex2));
    c.moments.push_back(moment("E[v^2]", cp, 1, true, 1.0 / cfg.m));
    c.moments.push_back(moment("E[z_1^2]", cp, 2, true, 1.0));
    c.moments.push_back(moment("E[z_N^2]", cp, 3, true, 1.0));
    for (const auto& mc : c.moments) c.max_abs_z = std::max(c.max_abs_z, std::abs(mc.z_score));
    std::vector<double> xs(n_traj), vs(n_traj);
    for (std::size_t i = 0; i < n_traj; ++i) {
      xs[i] = slot(cp, 0, i);
      vs[i] = slot(cp, 1, i);
    }
    c.ks_x = ks_statistic(std::move(xs), [&](double x) { return marginal.cdf(x); });
    c.ks_v = ks_statistic(std::move(vs), [&](double v) { return normal_cdf(v, 0.0, sv); });
    rep.checkpoints.push_back(std::move(c));
  }
  return rep;
}

}  // namespace gle
