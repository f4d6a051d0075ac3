#include "gle/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gle/coupling.hpp"
#include "gle/measure.hpp"
#include "gle/statistics.hpp"

#ifndef GLE_VERSION
#define GLE_VERSION "0.0.0"
#endif

namespace gle {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

/// CSV writer: header row, LF endings, shortest round-trip floats.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  CsvWriter& cell(double x) {
    sep();
    out_ << format_double(x);
    return *this;
  }
  CsvWriter& cell(std::size_t x) {
    sep();
    out_ << x;
    return *this;
  }
  CsvWriter& cell(const std::string& s) {
    sep();
    out_ << s;
    return *this;
  }
  void end() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ofstream out_;
  bool first_ = true;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json config_json(const RunConfig& c) {
  const auto& ic = c.integrator;
  const auto& ex = c.experiment;
  json j;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["output_dir"] = c.output_dir;
  j["kernel"] = {{"alpha", c.kernel.alpha},
                 {"beta", c.kernel.beta},
                 {"n_modes", c.kernel.n_modes},
                 {"s", c.kernel.s},
                 {"enforce_regime", c.enforce_regime}};
  j["physics"] = {{"m", ic.m},
                  {"gamma", ic.gamma},
                  {"potential",
                   {{"type", std::string(c.potential.kind_name())},
                    {"parameters", c.potential.parameters()}}}};
  j["integrator"] = {{"dt", ic.dt},
                     {"t_final", ic.t_final},
                     {"n_steps", ic.n_steps()},
                     {"scheme", std::string(to_string(ic.scheme))},
                     {"thin_stride", ic.thin_stride},
                     {"cutoff_R", ic.cutoff_R ? json(*ic.cutoff_R) : json(nullptr)},
                     {"multirate_tol", ic.multirate_tol}};
  j["experiment"] = {{"kernel_t_lo", ex.kernel_t_lo},
                     {"kernel_t_hi", ex.kernel_t_hi},
                     {"kernel_points", ex.kernel_points},
                     {"fit_t_lo", ex.fit_t_lo},
                     {"fit_t_hi", ex.fit_t_hi},
                     {"x0", ex.x0},
                     {"v0", ex.v0},
                     {"store_modes", ex.store_modes},
                     {"n_traj", ex.n_traj},
                     {"n_record", ex.n_record},
                     {"window_lo", ex.window_lo ? json(*ex.window_lo) : json(nullptr)},
                     {"window_hi", ex.window_hi ? json(*ex.window_hi) : json(nullptr)},
                     {"checkpoints", ex.checkpoints},
                     {"zero_modes", ex.zero_modes},
                     {"record_every", ex.record_every},
                     {"n_samples", ex.n_samples},
                     {"lambda", ex.lambda ? json(*ex.lambda) : json(nullptr)},
                     {"kappa", ex.kappa ? json(*ex.kappa) : json("auto")},
                     {"n_runs", ex.n_runs},
                     {"xbar0", ex.xbar0},
                     {"vbar0", ex.vbar0},
                     {"eta", ex.eta},
                     {"cost_R", ex.cost_R},
                     {"plot_scripts", ex.plot_scripts}};
  return j;
}

json regime_json(const KernelSpec& k) {
  const Regime r = classify_regime(k);
  return {{"tag", std::string(to_string(r.tag))},
          {"s_lo", r.s_lo},
          {"s_hi", r.s_hi},
          {"s_in_range", r.s_in_range}};
}

json assumption_json(const Potential& p) {
  const auto rep = check_assumptions(p);
  return {{"conforming", rep.conforming},
          {"b_estimate", num(rep.b_estimate)},
          {"growth_ok", rep.growth_ok},
          {"derivative_bound_ok", rep.derivative_bound_ok},
          {"derivative_bound", {{"q", rep.derivative_bound.q}, {"offset", rep.derivative_bound.offset}}},
          {"derivative_integral", num(rep.derivative_integral)},
          {"derivative_integral_ok", rep.derivative_integral_ok},
          {"notes", rep.notes}};
}

json tail_fit_json(const TailFit& f, double lo, double hi) {
  return {{"t_lo", lo},
          {"t_hi", hi},
          {"slope", num(f.slope)},
          {"intercept", num(f.intercept)},
          {"window_exceeds_plateau", f.window_exceeds_plateau},
          {"plateau_limit", num(f.plateau_limit)}};
}

struct Context {
  const RunConfig& cfg;
  unsigned threads;
  std::ostream& log;
  fs::path dir;
  ModeSet modes;
  json derived = json::object();
  std::vector<std::string> files;

  fs::path file(const std::string& name) {
    files.push_back(name);
    return dir / name;
  }
};

void run_kernel(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto& ex = c.experiment;
  const auto grid = logspace(ex.kernel_t_lo, ex.kernel_t_hi, ex.kernel_points);
  {
    const double bound = truncation_tail_bound(c.kernel);
    CsvWriter csv(ctx.file("kernel.csv"), {"t", "K", "tail_bound"});
    for (double t : grid) {
      csv.cell(t).cell(eval_kernel(ctx.modes, t)).cell(bound);
      csv.end();
    }
  }
  {
    CsvWriter csv(ctx.file("modes.csv"), {"k", "c", "lambda"});
    for (std::size_t k = 0; k < ctx.modes.size(); ++k) {
      csv.cell(k + 1).cell(ctx.modes.c[k]).cell(ctx.modes.lambda[k]);
      csv.end();
    }
  }
  const auto fit = fit_tail_exponent(ctx.modes, ex.fit_t_lo, ex.fit_t_hi, 50);
  json j;
  j["regime"] = regime_json(c.kernel);
  j["n_modes"] = ctx.modes.size();
  j["kernel_mass"] = kernel_mass(ctx.modes);
  j["truncation_tail_bound"] = truncation_tail_bound(c.kernel);
  j["kernel_l2_squared"] = kernel_l2_squared(ctx.modes);
  j["expected_tail_exponent"] = -c.kernel.alpha;
  j["tail_fit"] = tail_fit_json(fit, ex.fit_t_lo, ex.fit_t_hi);
  write_json(ctx.file("kernel.json"), j);
}

void run_simulate(Context& ctx) {
  const auto& c = ctx.cfg;
  SimulateOptions opts;
  opts.s = c.kernel.s;
  opts.store_modes = c.experiment.store_modes;
  const auto traj =
      simulate(c.experiment.x0, c.experiment.v0, ctx.modes, c.potential, c.integrator, opts);
  {
    std::vector<std::string> header{"t", "x", "v"};
    if (opts.store_modes) {
      for (std::size_t k = 1; k <= ctx.modes.size(); ++k) header.push_back("z" + std::to_string(k));
    }
    CsvWriter csv(ctx.file("trajectory.csv"), header);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      const State& s = traj.states[i];
      csv.cell(traj.times[i]).cell(s.x).cell(s.v);
      for (double z : s.z) csv.cell(z);
      csv.end();
    }
  }
  const State& last = traj.states.back();
  json j;
  j["n_records"] = traj.times.size();
  j["t_final"] = traj.times.back();
  j["sup_norm_sq"] = traj.sup_norm_sq;
  j["final"] = {{"x", last.x}, {"v", last.v}};
  j["seed_used"] = traj.seed_used;
  write_json(ctx.file("simulate.json"), j);
}

void write_msd_plot(Context& ctx, const MsdCurve& curve) {
  std::ofstream gp(ctx.file("msd.gp"), std::ios::binary);
  gp << "set datafile separator ','\n"
     << "set logscale xy\n"
     << "set xlabel 't'\nset ylabel 'E[x^2]'\n"
     << "set key top left\n"
     << "set arrow from " << format_double(curve.window_lo) << ", graph 0 to "
     << format_double(curve.window_lo) << ", graph 1 nohead dt 2\n"
     << "set arrow from " << format_double(curve.window_hi) << ", graph 0 to "
     << format_double(curve.window_hi) << ", graph 1 nohead dt 2\n"
     << "plot 'msd.csv' using 1:2 skip 1 with points title 'ensemble', \\\n"
     << "     'msd.csv' using 1:4 skip 1 with lines title 'exact'\n";
}

void run_msd(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto& ex = c.experiment;
  EnsembleSpec spec;
  spec.n_traj = ex.n_traj;
  spec.init = EnsembleSpec::Init::FromMu;
  spec.x0 = ex.x0;
  spec.n_record = ex.n_record;
  spec.threads = ctx.threads;
  ctx.log << "msd: " << ex.n_traj << " trajectories, " << c.integrator.n_steps() << " steps each\n";
  const auto curve = msd_ensemble(spec, ctx.modes, c.potential, c.integrator, ex.window_lo,
                                  ex.window_hi);
  const auto exact = exact_free_msd(ctx.modes, c.integrator.m, c.integrator.gamma, curve.times,
                                    std::min(1e-2, c.integrator.dt));
  {
    CsvWriter csv(ctx.file("msd.csv"), {"t", "msd", "stderr", "exact_msd"});
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
      csv.cell(curve.times[i]).cell(curve.msd[i]).cell(curve.stderr_[i]).cell(exact[i]);
      csv.end();
    }
  }
  MsdCurve exact_curve = curve;
  exact_curve.msd = exact;
  fit_msd_window(exact_curve, curve.window_lo, curve.window_hi);
  json j;
  j["n_traj"] = ex.n_traj;
  j["window"] = {{"lo", curve.window_lo},
                 {"hi", curve.window_hi},
                 {"upper_clamped_to_t_final", curve.window_clamped},
                 {"points", curve.points_in_window}};
  j["slope"] = num(curve.slope);
  j["intercept"] = num(curve.intercept);
  j["exact_slope"] = num(exact_curve.slope);
  j["expected_slope"] = c.kernel.alpha > 1.0 ? 1.0 : c.kernel.alpha;
  j["note"] = "finite-N, finite-T windowed slope; tolerances are engineering choices";
  write_json(ctx.file("msd.json"), j);
  ctx.derived["msd_window"] = {curve.window_lo, curve.window_hi};
  if (ex.plot_scripts) write_msd_plot(ctx, curve);
}

void write_histogram(CsvWriter& csv, const std::string& name, const std::vector<double>& xs,
                     const std::function<double(double)>& cdf, double lo, double hi,
                     std::size_t bins) {
  std::vector<std::size_t> counts(bins, 0);
  const double w = (hi - lo) / static_cast<double>(bins);
  for (double x : xs) {
    if (x < lo || x >= hi) continue;
    ++counts[std::min(static_cast<std::size_t>((x - lo) / w), bins - 1)];
  }
  for (std::size_t b = 0; b < bins; ++b) {
    const double a = lo + w * static_cast<double>(b);
    const double target = (cdf(a + w) - cdf(a)) / w;
    csv.cell(name).cell(a + 0.5 * w)
        .cell(static_cast<double>(counts[b]) / (static_cast<double>(xs.size()) * w))
        .cell(target);
    csv.end();
  }
}

void run_stationarity(Context& ctx) {
  const auto& c = ctx.cfg;
  ctx.log << "stationarity: " << c.integrator.n_steps() << " steps\n";
  const auto rep = stationarity_test(ctx.modes, c.potential, c.integrator, c.experiment.record_every);
  const GibbsMarginal marginal(c.potential);
  const double sx = std::sqrt(rep.target_x2);
  const double sv = 1.0 / std::sqrt(c.integrator.m);
  {
    CsvWriter csv(ctx.file("stationarity_hist.csv"), {"variable", "center", "empirical", "target"});
    write_histogram(csv, "x", rep.x_samples, [&](double x) { return marginal.cdf(x); }, -4 * sx,
                    4 * sx, 60);
    write_histogram(csv, "v", rep.v_samples, [&](double v) { return normal_cdf(v, 0, sv); },
                    -4 * sv, 4 * sv, 60);
  }
  json j;
  j["n_raw"] = rep.n_raw;
  j["record_every"] = c.experiment.record_every;
  j["tau_x"] = rep.tau_x;
  j["tau_v"] = rep.tau_v;
  j["thin_x"] = rep.thin_x;
  j["thin_v"] = rep.thin_v;
  j["x"] = {{"n", rep.x_test.n}, {"ks", rep.x_test.ks_stat}, {"l1_hist", rep.x_test.l1_hist}};
  j["v"] = {{"n", rep.v_test.n}, {"ks", rep.v_test.ks_stat}, {"l1_hist", rep.v_test.l1_hist}};
  j["time_average_x2"] = {{"value", rep.mean_x2.mean},
                          {"stderr", rep.mean_x2.stderr_},
                          {"target", rep.target_x2}};
  j["time_average_v2"] = {{"value", rep.mean_v2.mean},
                          {"stderr", rep.mean_v2.stderr_},
                          {"target", rep.target_v2}};
  write_json(ctx.file("stationarity.json"), j);
  if (c.experiment.plot_scripts) {
    std::ofstream gp(ctx.file("stationarity.gp"), std::ios::binary);
    gp << "set datafile separator ','\n"
       << "set multiplot layout 1,2\n"
       << "set title 'x'\n"
       << "plot 'stationarity_hist.csv' using ($1 eq 'x' ? $2 : 1/0):3 skip 1 with boxes title "
          "'empirical', '' using ($1 eq 'x' ? $2 : 1/0):4 skip 1 with lines title 'target'\n"
       << "set title 'v'\n"
       << "plot 'stationarity_hist.csv' using ($1 eq 'v' ? $2 : 1/0):3 skip 1 with boxes title "
          "'empirical', '' using ($1 eq 'v' ? $2 : 1/0):4 skip 1 with lines title 'target'\n"
       << "unset multiplot\n";
  }
}

void run_invariance(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto& ex = c.experiment;
  InvarianceOptions opts;
  opts.threads = ctx.threads;
  opts.zero_modes = ex.zero_modes;
  ctx.log << "invariance: " << ex.n_traj << " trajectories\n";
  const auto rep = invariance_propagation_test(ctx.modes, c.potential, c.integrator, ex.n_traj,
                                               ex.checkpoints, opts);
  json cps = json::array();
  {
    CsvWriter csv(ctx.file("invariance.csv"),
                  {"t", "moment", "estimate", "target", "stderr", "z_score"});
    for (const auto& cp : rep.checkpoints) {
      json mj = json::array();
      for (const auto& m : cp.moments) {
        csv.cell(cp.t).cell(m.name).cell(m.estimate).cell(m.target).cell(m.stderr_).cell(m.z_score);
        csv.end();
        mj.push_back({{"name", m.name},
                      {"estimate", m.estimate},
                      {"target", m.target},
                      {"stderr", m.stderr_},
                      {"z_score", num(m.z_score)}});
      }
      cps.push_back({{"t", cp.t},
                     {"moments", mj},
                     {"ks_x", cp.ks_x},
                     {"ks_v", cp.ks_v},
                     {"max_abs_z", num(cp.max_abs_z)}});
    }
  }
  json j;
  j["n_traj"] = rep.n_traj;
  j["zero_modes"] = ex.zero_modes;
  j["checkpoints"] = cps;
  write_json(ctx.file("invariance.json"), j);
}

void run_measure(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto& ex = c.experiment;
  const double m = c.integrator.m;
  const double gamma = c.integrator.gamma;
  const double s = c.kernel.s;
  const std::size_t N = ctx.modes.size();
  const GibbsSampler sampler(c.potential, m, N, *c.seed);
  const GibbsMarginal marginal(c.potential);
  const auto samples = sampler.sample_many(ex.n_samples, ctx.threads);

  const auto pc = psi_constants(c.kernel, ctx.modes, m, gamma);
  std::optional<ThetaConstants> tc;
  const Regime r = classify_regime(c.kernel);
  if (r.tag == RegimeTag::Diffusive && r.s_in_range && gamma > 0.0) {
    tc = theta_constants(c.kernel, ctx.modes, m, gamma);
  }

  std::size_t psi_violations = 0;
  std::size_t theta_violations = 0;
  const auto weights = norm_weights(N, s);
  std::vector<double> xs, vs;
  double sum_x2 = 0, sum_v2 = 0, sum_z1 = 0, sum_zmid = 0, sum_zN = 0, sum_norm = 0;
  const std::size_t mid = (N + 1) / 2 - 1;  // k = ceil(N/2)
  for (const auto& st : samples) {
    const double psi = lyapunov_psi(st, ctx.modes, c.potential, m, s);
    if (generator_on_psi(st, ctx.modes, c.potential, m, gamma, s) > pc.a1 * psi + pc.a2) {
      ++psi_violations;
    }
    if (tc && generator_on_theta(st, ctx.modes, c.potential, m, gamma, s, tc->split_N) > tc->a) {
      ++theta_violations;
    }
    xs.push_back(st.x);
    vs.push_back(st.v);
    sum_x2 += st.x * st.x;
    sum_v2 += st.v * st.v;
    sum_z1 += st.z.front() * st.z.front();
    sum_zmid += st.z[mid] * st.z[mid];
    sum_zN += st.z.back() * st.z.back();
    sum_norm += norm_minus_s_sq(st, weights);
  }
  const double n = static_cast<double>(samples.size());
  const double ex2 = marginal.expect([](double x) { return x * x; });
  double weight_sum = 0.0;
  for (double w : weights) weight_sum += w;
  struct Row {
    std::string name;
    double estimate, target;
  };
  const std::vector<Row> rows{{"E[x^2]", sum_x2 / n, ex2},
                              {"E[v^2]", sum_v2 / n, 1.0 / m},
                              {"E[z_1^2]", sum_z1 / n, 1.0},
                              {"E[z_mid^2]", sum_zmid / n, 1.0},
                              {"E[z_N^2]", sum_zN / n, 1.0},
                              {"E[norm^2]", sum_norm / n, ex2 + 1.0 / m + weight_sum}};
  json moments = json::array();
  {
    CsvWriter csv(ctx.file("measure_moments.csv"), {"moment", "estimate", "target"});
    for (const auto& row : rows) {
      csv.cell(row.name).cell(row.estimate).cell(row.target);
      csv.end();
      moments.push_back({{"name", row.name}, {"estimate", row.estimate}, {"target", row.target}});
    }
  }
  json j;
  j["n_samples"] = samples.size();
  j["envelope_b"] = sampler.envelope_b();
  j["a1"] = pc.a1;
  j["a2"] = pc.a2;
  j["a1_full"] = num(pc.a1_full);
  j["a2_full"] = num(pc.a2_full);
  if (tc) {
    j["a"] = tc->a;
    j["split_N"] = tc->split_N;
    j["a1_theta"] = tc->a1_theta;
    j["a1_theta_full"] = tc->a1_theta_full;
    j["split_N_full"] = tc->split_N_full;
    j["theta_admissible"] = tc->admissible;
  } else {
    j["a"] = nullptr;
    j["split_N"] = nullptr;
  }
  j["psi_drift_violations"] = psi_violations;
  j["theta_drift_violations"] = tc ? json(theta_violations) : json(nullptr);
  j["moments"] = moments;
  const double sv = 1.0 / std::sqrt(m);
  j["ks"] = {{"x", ks_statistic(xs, [&](double x) { return marginal.cdf(x); })},
             {"v", ks_statistic(vs, [&](double v) { return normal_cdf(v, 0, sv); })}};
  write_json(ctx.file("measure.json"), j);
}

void run_coupling(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto& ex = c.experiment;
  const std::size_t N = ctx.modes.size();
  const double lambda = ex.lambda ? *ex.lambda : default_lambda(ctx.modes);
  validate_lambda(ctx.modes, lambda);
  const State X0 = init_state(ex.x0, ex.v0,
                              derive_stream_seed(*c.seed, StreamDomain::InitialModes, 0), N);
  State Xt0 = X0;
  Xt0.x -= ex.xbar0;
  Xt0.v -= ex.vbar0;
  const State Xbar0(ex.xbar0, ex.vbar0, std::vector<double>(N, 0.0));
  const auto bound = cost_bound(X0, Xbar0, c.kernel, ctx.modes, c.potential, c.integrator.m,
                                c.integrator.gamma, lambda, ex.cost_R);
  const double kappa = ex.kappa ? *ex.kappa : bound.kappa_auto;
  ctx.derived["lambda"] = lambda;
  ctx.derived["kappa"] = kappa;
  ctx.derived["kappa_source"] = ex.kappa ? "config" : "auto";
  ctx.log << "coupling: " << ex.n_runs << " runs, lambda = " << lambda << ", kappa = " << kappa
          << "\n";

  CouplingOptions opts;
  opts.n_runs = ex.n_runs;
  opts.threads = ctx.threads;
  opts.eta = ex.eta;
  const auto rep = run_coupling_experiment(X0, Xt0, c.kernel, ctx.modes, c.potential,
                                           c.integrator, lambda, kappa, opts);
  json runs = json::array();
  {
    CsvWriter csv(ctx.file("coupling_runs.csv"), {"run", "t", "norm", "cost"});
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
      const auto& run = rep.runs[i];
      for (std::size_t k = 0; k < run.times.size(); ++k) {
        csv.cell(i).cell(run.times[k]).cell(run.norms[k]).cell(run.costs[k]);
        csv.end();
      }
      runs.push_back({{"run", i},
                      {"initial_norm", run.initial_norm},
                      {"final_norm", run.final_norm},
                      {"cost", run.cost},
                      {"stopped", run.stopped},
                      {"stop_time", run.stopped ? json(run.stop_time) : json(nullptr)},
                      {"sup_scaled_excess", run.sup_scaled_excess}});
    }
  }
  json j;
  j["lambda"] = lambda;
  j["kappa"] = kappa;
  j["kappa_source"] = ex.kappa ? "config" : "auto";
  j["cost_bound"] = {{"C1", bound.C1}, {"C2", bound.C2}, {"C3", bound.C3}, {"C4", bound.C4},
                     {"C5", bound.C5}, {"C6", bound.C6}, {"kernel_l2_squared", bound.kernel_l2},
                     {"theta0", bound.theta0}, {"a", bound.a}, {"split_N", bound.split_N},
                     {"regime_d_constants", bound.regime_d}, {"R", bound.R},
                     {"f_C1", bound.f_C1}, {"kappa_auto", bound.kappa_auto}};
  j["regime"] = regime_json(c.kernel);
  j["regime_recommended"] = rep.regime_recommended;
  j["n_runs"] = rep.runs.size();
  j["never_stopped_fraction"] = rep.never_stopped_fraction;
  j["never_stopped_ci95"] = {rep.ci_lo, rep.ci_hi};
  j["max_contraction_ratio"] = rep.max_ratio;
  j["cost"] = {{"min", rep.cost_min}, {"median", rep.cost_median}, {"max", rep.cost_max}};
  j["tail"] = {{"eta", ex.eta},
               {"thresholds", rep.tail_thresholds},
               {"exceedance_fraction", rep.tail_fractions},
               {"fitted_rate", num(rep.tail_rate)}};
  j["runs"] = runs;
  write_json(ctx.file("coupling.json"), j);
}

const std::map<std::string, std::function<void(Context&)>>& table() {
  static const std::map<std::string, std::function<void(Context&)>> t{
      {"kernel", run_kernel},         {"simulate", run_simulate},
      {"msd", run_msd},               {"stationarity", run_stationarity},
      {"invariance", run_invariance}, {"measure", run_measure},
      {"coupling", run_coupling}};
  return t;
}

json exception_json(const std::exception& e) {
  json err;
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) {
    err["type"] = "config";
    err["kind"] = to_string(ce->kind());
    err["key"] = ce->key();
    err["line"] = ce->line();
    err["column"] = ce->column();
    err["message"] = ce->detail();
  } else if (const auto* be = dynamic_cast<const BlowUpError*>(&e)) {
    err["type"] = "blow_up";
    err["time"] = be->time();
    err["step"] = be->step_index();
    err["message"] = be->what();
  } else if (dynamic_cast<const std::invalid_argument*>(&e)) {
    err["type"] = "invalid_argument";
    err["message"] = e.what();
  } else {
    err["type"] = "runtime";
    err["message"] = e.what();
  }
  return {{"error", err}};
}

}  // namespace

std::string version() { return GLE_VERSION; }

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"kernel",     "simulate", "msd",     "stationarity",
                                              "invariance", "measure",  "coupling"};
  return names;
}

std::vector<std::string> run_subcommand(const std::string& name, const RunConfig& cfg,
                                        unsigned threads, std::ostream& log) {
  const auto it = table().find(name);
  if (it == table().end()) throw std::invalid_argument("unknown subcommand '" + name + "'");
  if (!cfg.seed) {
    throw ConfigError(ConfigError::Kind::Missing, "seed",
                      "a seed is required (set seed in the config or pass --seed)");
  }
  RunConfig resolved = cfg;
  resolved.integrator.seed = *cfg.seed;
  resolved.kernel.validate();
  resolved.integrator.validate();

  Context ctx{resolved, std::max(1u, threads), log, fs::path(resolved.output_dir),
              build_modes(resolved.kernel), json::object(), {}};
  fs::create_directories(ctx.dir);
  it->second(ctx);

  json manifest;
  manifest["tool"] = "glesim";
  manifest["version"] = version();
  manifest["subcommand"] = name;
  manifest["seed"] = *resolved.seed;
  manifest["config"] = config_json(resolved);
  manifest["config_toml"] = emit_config(resolved);
  manifest["checks"] = {{"regime", regime_json(resolved.kernel)},
                        {"potential", assumption_json(resolved.potential)}};
  manifest["derived"] = ctx.derived;
  manifest["artifacts"] = ctx.files;
  write_json(ctx.dir / "manifest.json", manifest);
  ctx.files.push_back("manifest.json");
  return ctx.files;
}

std::string error_json(const std::exception& e) { return exception_json(e).dump(2); }

void write_error_json(const std::string& dir, const std::exception& e) {
  try {
    fs::create_directories(dir);
    write_json(fs::path(dir) / "error.json", exception_json(e));
  } catch (...) {
  }
}

}  // namespace gle
