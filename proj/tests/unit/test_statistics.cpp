#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "gle/statistics.hpp"

using namespace gle;

namespace {

SimConfig config(double dt, double t_final, std::uint64_t seed = 1,
                 Scheme scheme = Scheme::SplittingExactOU) {
  SimConfig c;
  c.dt = dt;
  c.t_final = t_final;
  c.seed = seed;
  c.scheme = scheme;
  return c;
}

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = rng.normal();
  return out;
}

std::vector<double> ar1(std::size_t n, double rho, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> out(n);
  double x = rng.normal();
  const double sd = std::sqrt(1 - rho * rho);
  for (auto& o : out) {
    x = rho * x + sd * rng.normal();
    o = x;
  }
  return out;
}

}  // namespace

TEST(Ks, FivePointHandCheck) {
  // Uniform(0,1) target. Gaps above: 0.1, 0, 0.1, 0.1, 0.05; below: 0.1, 0.2, 0.1, 0.1, 0.15.
  const double d = ks_statistic({0.7, 0.1, 0.95, 0.4, 0.5}, [](double x) { return x; });
  EXPECT_NEAR(d, 0.2, 1e-15);
}

TEST(Ks, NormalSamples) {
  EXPECT_LT(ks_statistic(normals(100000, 3), [](double x) { return normal_cdf(x); }), 0.01);
}

TEST(Ks, ConstantSamples) {
  const std::vector<double> c(1000, 5.0);
  EXPECT_GT(ks_statistic(c, [](double x) { return normal_cdf(x); }), 0.99);
  EXPECT_THROW(ks_statistic({}, [](double x) { return x; }), std::invalid_argument);
}

TEST(Histogram, Distances) {
  const auto xs = normals(100000, 4);
  EXPECT_LT(l1_histogram_distance(xs, [](double x) { return normal_cdf(x); }, -3, 3, 100), 0.05);
  const std::vector<double> c(1000, 0.01);
  EXPECT_GT(l1_histogram_distance(c, [](double x) { return normal_cdf(x); }, -3, 3, 100), 1.9);
  EXPECT_THROW(marginal_test(std::vector<double>(999, 0.0), [](double x) { return x; }),
               std::invalid_argument);
}

TEST(NormalCdf, KnownValues) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-15);
  EXPECT_NEAR(normal_cdf(1.0, 1.0, 3.0), 0.5, 1e-15);
}

TEST(TimeAverage, ConstantIsExactlyOne) {
  const std::vector<double> t{0.0, 0.1, 0.35, 0.351, 2.0, 7.77};
  const std::vector<double> f(t.size(), 1.0);
  const auto avg = time_average(t, f);
  EXPECT_EQ(avg.value, 1.0);
  for (double r : avg.running) EXPECT_EQ(r, 1.0);
  RunningAverage ra;
  for (std::size_t i = 0; i < t.size(); ++i) ra.add(t[i], 1.0);
  EXPECT_EQ(ra.value(), 1.0);
}

TEST(TimeAverage, LinearIsMidpoint) {
  std::vector<double> t, f;
  for (int i = 0; i <= 50; ++i) {
    t.push_back(2.0 + 0.1 * i);
    f.push_back(3.0 * t.back() - 1.0);
  }
  const auto avg = time_average(t, f);
  EXPECT_NEAR(avg.value, 3.0 * 4.5 - 1.0, 1e-12);
  RunningAverage ra;
  for (std::size_t i = 0; i < t.size(); ++i) ra.add(t[i], f[i]);
  EXPECT_NEAR(ra.value(), avg.value, 1e-12);
  EXPECT_NEAR(ra.span(), 5.0, 1e-12);
}

TEST(Autocorrelation, Ar1) {
  const double rho = 0.8;
  const auto xs = ar1(400000, rho, 5);
  const double tau = integrated_autocorrelation_time(xs);
  EXPECT_NEAR(tau, (1 + rho) / (1 - rho), 0.15 * 9.0);
  EXPECT_NEAR(integrated_autocorrelation_time(normals(100000, 6)), 1.0, 0.2);
}

TEST(BatchMeans, IidStandardError) {
  const std::size_t n = 100000;
  const auto xs = normals(n, 7);
  const auto est = batch_means(xs, 50);
  EXPECT_NEAR(est.stderr_, 1.0 / std::sqrt(n), 0.3 / std::sqrt(n));
  EXPECT_LT(std::abs(est.mean), 4.0 / std::sqrt(n));
}

TEST(TimeAverageOnPaths, VelocitySquaredHarmonic) {
  const auto modes = build_modes({1.5, 3, 10, 0.6});
  auto cfg = config(0.01, 10000.0, 8);
  const auto rep = stationarity_test(modes, Potential::harmonic(1), cfg, 5);
  EXPECT_LT(std::abs(rep.mean_v2.mean - 1.0), 3 * rep.mean_v2.stderr_);
  EXPECT_LT(std::abs(rep.mean_x2.mean - 1.0), 3 * rep.mean_x2.stderr_);
  EXPECT_GE(rep.thin_x, 1u);
  EXPECT_LT(rep.x_test.ks_stat, 0.05);
  EXPECT_LT(rep.v_test.ks_stat, 0.05);
}

TEST(TimeAverageOnPaths, PositionSquaredDoubleWell) {
  const auto modes = build_modes({1.5, 3, 10, 0.6});
  const auto p = Potential::double_well(1, 1);
  auto cfg = config(0.01, 10000.0, 9);
  const auto rep = stationarity_test(modes, p, cfg, 5);
  GibbsMarginal g(p);
  EXPECT_DOUBLE_EQ(rep.target_x2, g.expect([](double x) { return x * x; }));
  EXPECT_LT(std::abs(rep.mean_x2.mean - rep.target_x2), 3 * rep.mean_x2.stderr_);
}

TEST(Invariance, ExactStartAndRelaxation) {
  const auto modes = build_modes({1.5, 3, 10, 0.6});
  const auto p = Potential::harmonic(1);
  const auto cfg = config(0.01, 5.0, 10);
  const auto good = invariance_propagation_test(modes, p, cfg, 2000, {0.0, 1.0});
  ASSERT_EQ(good.checkpoints.size(), 2u);
  EXPECT_EQ(good.checkpoints[0].moments.size(), 5u);
  for (const auto& cp : good.checkpoints) EXPECT_LT(cp.max_abs_z, 4.0) << "t=" << cp.t;
  EXPECT_LT(good.checkpoints[0].max_abs_z, 3.0);

  InvarianceOptions wrong;
  wrong.zero_modes = true;
  const auto bad = invariance_propagation_test(modes, p, cfg, 2000, {0.0, 1.0, 5.0}, wrong);
  auto z1 = [&](std::size_t cp) { return bad.checkpoints[cp].moments[3].z_score; };
  EXPECT_LT(z1(0), -4.0);
  EXPECT_LT(std::abs(z1(2)), std::abs(z1(1)));
  EXPECT_LT(std::abs(z1(1)), std::abs(z1(0)));
}

TEST(Msd, BallisticStart) {
  const auto modes = build_modes({1.5, 3, 10, 0.6});
  EnsembleSpec es;
  es.n_traj = 2000;
  es.n_record = 30;
  const auto c = msd_ensemble(es, modes, Potential::zero(), config(0.001, 0.05, 11), 0.002, 0.05);
  EXPECT_NEAR(c.slope, 2.0, 0.1);
  EXPECT_THROW(msd_ensemble(es, modes, Potential::harmonic(1), config(0.01, 1)), std::invalid_argument);
}

TEST(Msd, ThreadCountDoesNotChangeResult) {
  const auto modes = build_modes({1.5, 3, 20, 0.6});
  EnsembleSpec es;
  es.n_traj = 64;
  es.n_record = 10;
  const auto cfg = config(0.01, 5.0, 12);
  const auto a = msd_ensemble(es, modes, Potential::zero(), cfg);
  es.threads = 4;
  const auto b = msd_ensemble(es, modes, Potential::zero(), cfg);
  EXPECT_EQ(a.msd, b.msd);
  EXPECT_EQ(a.stderr_, b.stderr_);
}

TEST(Msd, StandardErrorShrinksWithEnsemble) {
  const auto modes = build_modes({1.5, 3, 10, 0.6});
  EnsembleSpec es;
  es.n_record = 5;
  const auto cfg = config(0.01, 5.0, 13);
  es.n_traj = 2000;
  const auto a = msd_ensemble(es, modes, Potential::zero(), cfg);
  es.n_traj = 4000;
  const auto b = msd_ensemble(es, modes, Potential::zero(), cfg);
  const double ratio = a.stderr_.back() / b.stderr_.back();
  EXPECT_NEAR(ratio * ratio, 2.0, 0.3);
}

TEST(Msd, ExactCurveShortTimeAndWindow) {
  const auto modes = build_modes({1.5, 3, 10, 0.6});
  const std::vector<double> ts{1e-3, 1e-2};
  const auto ex = exact_free_msd(modes, 2.0, 1.0, ts, 1e-4);
  EXPECT_NEAR(ex[0], 1e-6 / 2.0, 1e-8);
  EXPECT_NEAR(ex[1] / 1e-4, 0.5, 0.01);
  bool clamped = false;
  const auto [lo, hi] = default_msd_window(build_modes({0.5, 3, 1000, 0.6}), 200.0, &clamped);
  EXPECT_EQ(lo, 10.0);
  EXPECT_EQ(hi, 200.0);
  EXPECT_TRUE(clamped);
  const auto w = default_msd_window(build_modes({0.5, 3, 10, 0.6}), 200.0, &clamped);
  EXPECT_NEAR(w.second, 50.0, 1e-12);
  EXPECT_FALSE(clamped);
  MsdCurve curve;
  curve.times = {1, 2, 3};
  curve.msd = {1, 4, 9};
  fit_msd_window(curve, 1.5, 3);
  EXPECT_TRUE(std::isnan(curve.slope));
  fit_msd_window(curve, 1, 3);
  EXPECT_NEAR(curve.slope, 2.0, 1e-12);
}
