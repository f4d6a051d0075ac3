#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "gle/coupling.hpp"
#include "gle/measure.hpp"

using namespace gle;

namespace {

SimConfig config(double dt, double t_final, std::uint64_t seed = 1) {
  SimConfig c;
  c.dt = dt;
  c.t_final = t_final;
  c.seed = seed;
  return c;
}

// Fine RK4 on the controlled difference system, written independently of
// the closed form.
std::vector<double> rk4_difference(double x0, double v0, std::vector<double> z0, const ModeSet& modes,
                                   double lam, double t_end, double h) {
  std::vector<double> y{x0, v0};
  y.insert(y.end(), z0.begin(), z0.end());
  auto rhs = [&](const std::vector<double>& s) {
    std::vector<double> d(s.size());
    d[0] = s[1];
    d[1] = -3 * lam * s[1] - 2 * lam * lam * s[0];
    for (std::size_t k = 0; k < modes.size(); ++k) {
      d[2 + k] = -modes.lambda[k] * s[2 + k] + std::sqrt(modes.c[k]) * s[1];
    }
    return d;
  };
  const std::size_t n = static_cast<std::size_t>(std::lround(t_end / h));
  for (std::size_t i = 0; i < n; ++i) {
    auto k1 = rhs(y);
    std::vector<double> t(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) t[j] = y[j] + 0.5 * h * k1[j];
    auto k2 = rhs(t);
    for (std::size_t j = 0; j < y.size(); ++j) t[j] = y[j] + 0.5 * h * k2[j];
    auto k3 = rhs(t);
    for (std::size_t j = 0; j < y.size(); ++j) t[j] = y[j] + h * k3[j];
    auto k4 = rhs(t);
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return y;
}

}  // namespace

TEST(Control, ZeroForIdenticalStates) {
  const auto modes = build_modes({1.5, 3, 5, 0.6});
  const State x(0.3, -0.2, {0.1, 0.2, 0.3, 0.4, 0.5});
  EXPECT_EQ(control_u0(x, x, modes, Potential::double_well(1, 1), 1, 1, 2), 0.0);
}

TEST(Control, HandEvaluation) {
  const auto modes = build_modes({1.5, 3, 3, 0.6});
  const double u0 = control_u0_diff(0.7, 1.0, 0.0, {0, 0, 0}, modes, Potential::harmonic(1), 1, 1, 2);
  EXPECT_NEAR(u0, 7.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(u0, 4.9497, 1e-4);
}

TEST(Control, LinearForHarmonic) {
  const auto modes = build_modes({1.5, 3, 3, 0.6});
  const auto p = Potential::harmonic(1.7);
  const std::vector<double> z{0.2, -0.4, 0.9};
  const std::vector<double> z2{0.4, -0.8, 1.8};
  const double a = control_u0_diff(5.0, 0.3, -0.6, z, modes, p, 1.3, 0.7, 2.5);
  const double b = control_u0_diff(-2.0, 0.6, -1.2, z2, modes, p, 1.3, 0.7, 2.5);
  EXPECT_NEAR(b, 2 * a, 1e-12);
}

TEST(Control, Lambda) {
  for (auto [a, b] : {std::pair{0.5, 3.0}, std::pair{1.5, 3.0}, std::pair{1.0, 2.0}}) {
    EXPECT_EQ(default_lambda(build_modes({a, b, 20, 0.6})), 2.0);
  }
  const auto modes = build_modes({1.5, 3, 20, 0.6});
  EXPECT_THROW(validate_lambda(modes, 0.5), std::invalid_argument);
  EXPECT_THROW(validate_lambda(modes, 1.0), std::invalid_argument);
  EXPECT_NO_THROW(validate_lambda(modes, 3.0));
  auto pair = CoupledPair::from_states(State(20), State(20), 0.5, 10);
  EXPECT_THROW(CoupledPath(modes, Potential::harmonic(1), config(0.01, 1), pair), std::invalid_argument);
}

TEST(ClosedForm, InitialAndOneUnit) {
  const auto modes = build_modes({1.5, 3, 4, 0.6});
  const std::vector<double> z0(4, 0.0);
  const auto d0 = difference_ode_exact(1, 0, z0, modes, 2, 0, 0.6);
  EXPECT_DOUBLE_EQ(d0.xbar, 1.0);
  EXPECT_DOUBLE_EQ(d0.vbar, 0.0);
  const auto d1 = difference_ode_exact(1, 0, z0, modes, 2, 1, 0.6);
  EXPECT_NEAR(d1.xbar, 2 * std::exp(-2.0) - std::exp(-4.0), 1e-15);
  EXPECT_NEAR(d1.xbar, 0.252355, 1e-6);
}

TEST(ClosedForm, MatchesRk4) {
  const auto modes = build_modes({1.5, 3, 6, 0.6});
  const std::vector<double> z0{0.5, -0.2, 0.1, 0.0, 0.3, -1.0};
  for (double t : {0.3, 1.0, 4.0}) {
    const auto d = difference_ode_exact(0.8, -1.1, z0, modes, 2.0, t, 0.6);
    const auto r = rk4_difference(0.8, -1.1, z0, modes, 2.0, t, 1e-4);
    EXPECT_NEAR(d.xbar, r[0], 1e-10);
    EXPECT_NEAR(d.vbar, r[1], 1e-10);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(d.zbar[k], r[2 + k], 1e-10);
  }
}

TEST(ClosedForm, DecayEnvelopes) {
  const auto modes = build_modes({1.5, 3, 30, 0.6});
  const double lam = 2.0;
  for (auto [x0, v0] : {std::pair{1.0, 0.0}, std::pair{-0.5, 3.0}, std::pair{2.0, -5.0}}) {
    std::vector<double> z0(30);
    for (std::size_t k = 0; k < 30; ++k) z0[k] = std::sin(1.0 + k);
    const double C1 = 3 * std::abs(x0) + 3 * std::abs(v0) / lam;
    const double C2 = 4 * lam * std::abs(x0) + 4 * std::abs(v0);
    for (double t = 0.0; t <= 20.0; t += 0.05) {
      const auto d = difference_ode_exact(x0, v0, z0, modes, lam, t, 0.6);
      EXPECT_LE(std::abs(d.xbar), C1 * std::exp(-lam * t) + 1e-15);
      for (std::size_t k = 0; k < 30; ++k) {
        const double env = std::exp(-modes.lambda[k] * t) * (std::abs(z0[k]) + C2 * std::sqrt(modes.c[k]));
        EXPECT_LE(std::abs(d.zbar[k]), env + 1e-15) << "k=" << k << " t=" << t;
      }
    }
  }
}

TEST(CoupledPath, IdenticalStatesStayIdentical) {
  const auto modes = build_modes({1.5, 3, 10, 0.6});
  const auto p = Potential::double_well(1, 1);
  GibbsSampler sampler(p, 1.0, 10, 3);
  const State x = sampler.sample(std::uint64_t{0});
  CoupledPath path(modes, p, config(0.01, 5), CoupledPair::from_states(x, x, 2, 10));
  RngStream rng(1, StreamDomain::Coupling, 0);
  for (int i = 0; i < 500; ++i) path.step(rng);
  EXPECT_EQ(path.cost(), 0.0);
  EXPECT_FALSE(path.stopped());
  EXPECT_EQ(path.pair().shifted(), path.pair().primary);
}

TEST(CoupledPath, PrimaryFollowsPropagatorBitwise) {
  const auto modes = build_modes({1.5, 3, 8, 0.6});
  const auto p = Potential::double_well(1, 1);
  const auto cfg = config(0.01, 3);
  const State x0(0.5, 0.1, std::vector<double>(8, 0.2));
  const State xt0(-0.5, 0.0, std::vector<double>(8, 0.0));
  CoupledPath path(modes, p, cfg, CoupledPair::from_states(x0, xt0, 2, 1e9));
  Propagator prop(modes, p, cfg, x0);
  RngStream a(4, StreamDomain::Coupling, 0), b(4, StreamDomain::Coupling, 0);
  for (std::size_t i = 0; i < cfg.n_steps(); ++i) {
    path.step(a);
    prop.step(b);
  }
  EXPECT_EQ(path.pair().primary, prop.state());
}

TEST(CoupledPath, HarmonicDifferenceIgnoresNoise) {
  const auto modes = build_modes({1.5, 3, 8, 0.6});
  const auto p = Potential::harmonic(1);
  const auto cfg = config(0.01, 3);
  const State x0(0.5, 0.1, std::vector<double>(8, 0.2));
  const State xt0(-0.5, 0.0, std::vector<double>(8, 0.0));
  const auto start = CoupledPair::from_states(x0, xt0, 2, 1e9);
  CoupledPath a(modes, p, cfg, start), b(modes, p, cfg, start);
  RngStream ra(1, StreamDomain::Coupling, 0), rb(2, StreamDomain::Coupling, 7);
  for (std::size_t i = 0; i < cfg.n_steps(); ++i) {
    a.step(ra);
    b.step(rb);
    ASSERT_EQ(a.pair().difference, b.pair().difference);
    ASSERT_EQ(a.cost(), b.cost());
  }
  EXPECT_NE(a.pair().primary, b.pair().primary);
}

TEST(CoupledPath, HarmonicVelocityResidual) {
  const auto modes = build_modes({1.5, 3, 8, 0.6});
  const double lam = 2.0;
  auto cfg = config(0.01, 3);
  cfg.m = 1.7;
  cfg.gamma = 0.6;
  const State x0(0.5, 0.1, std::vector<double>(8, 0.2));
  const State xt0(-0.5, 0.4, std::vector<double>(8, -0.3));
  CoupledPath path(modes, Potential::harmonic(2.3), cfg, CoupledPair::from_states(x0, xt0, lam, 1e12));
  RngStream rng(3, StreamDomain::Coupling, 0);
  for (int i = 0; i < 100; ++i) {
    const State d = path.pair().difference;
    path.step(rng);
    const State& e = path.pair().difference;
    EXPECT_NEAR((e.v - d.v) / cfg.dt, -3 * lam * d.v - 2 * lam * lam * d.x, 1e-9);
  }
}

TEST(CoupledPath, ConvergesToClosedFormAtFirstOrder) {
  const auto modes = build_modes({1.5, 3, 10, 0.6});
  const auto p = Potential::harmonic(1);
  const State x0(1.0, 0.0, std::vector<double>(10, 0.0));
  const State xt0(0.0, 0.0, std::vector<double>(10, 0.0));
  const auto exact = difference_ode_exact(1.0, 0.0, std::vector<double>(10, 0.0), modes, 2, 10, 0.6);
  const auto weights = norm_weights(10, 0.6);
  std::vector<double> errs;
  for (double dt : {0.01, 0.005, 0.0025}) {
    const auto cfg = config(dt, 10);
    CoupledPath path(modes, p, cfg, CoupledPair::from_states(x0, xt0, 2, 1e12));
    RngStream rng(5, StreamDomain::Coupling, 0);
    double worst = 0.0;
    for (std::size_t i = 1; i <= cfg.n_steps(); ++i) {
      path.step(rng);
      if (i % static_cast<std::size_t>(std::lround(0.5 / dt)) == 0) {
        const auto ex = difference_ode_exact(1.0, 0.0, std::vector<double>(10, 0.0), modes, 2, path.time(), 0.6);
        const auto& d = path.pair().difference;
        worst = std::max({worst, std::abs(d.x - ex.xbar), std::abs(d.v - ex.vbar)});
        for (std::size_t k = 0; k < 10; ++k) worst = std::max(worst, std::abs(d.z[k] - ex.zbar[k]));
      }
    }
    errs.push_back(worst);
    EXPECT_NEAR(std::sqrt(path.difference_norm_sq(weights)), exact.full_norm, 20 * dt);
  }
  EXPECT_NEAR(errs[0] / errs[1], 2.0, 0.3);
  EXPECT_NEAR(errs[1] / errs[2], 2.0, 0.3);
}

TEST(CoupledPath, CostMonotoneAndStopsOnce) {
  const auto modes = build_modes({1.5, 3, 10, 0.6});
  const auto p = Potential::double_well(1, 1);
  const State x0(1.0, 0.0, std::vector<double>(10, 0.0));
  const State xt0(-1.0, 0.5, std::vector<double>(10, 0.3));
  const double kappa = 5.0;
  auto cfg = config(0.01, 10);
  CoupledPath path(modes, p, cfg, CoupledPair::from_states(x0, xt0, 2, kappa));
  RngStream rng(6, StreamDomain::Coupling, 0);
  double prev = 0.0;
  bool seen_stop = false;
  for (std::size_t i = 0; i < cfg.n_steps(); ++i) {
    const State d = path.pair().difference;
    const double x = path.x();
    const bool was = path.stopped();
    path.step(rng);
    EXPECT_GE(path.cost(), prev);
    if (was) {
      EXPECT_EQ(path.cost(), prev);
      EXPECT_EQ(path.last_u0(), 0.0);
      // Uncontrolled difference step.
      double mf = 0.0;
      for (std::size_t k = 0; k < 10; ++k) mf += std::sqrt(modes.c[k]) * d.z[k];
      const double expect_v = d.v + (-cfg.gamma * d.v - p.dphi_difference(x, d.x) - mf) / cfg.m * cfg.dt;
      EXPECT_NEAR(path.pair().difference.v, expect_v, 1e-12);
    }
    if (!was && path.stopped()) {
      EXPECT_GE(path.cost(), kappa);
      EXPECT_LT(prev, kappa);
      seen_stop = true;
    }
    if (was) {
      EXPECT_TRUE(path.stopped());
    }
    prev = path.cost();
  }
  EXPECT_TRUE(seen_stop);
}

TEST(CoupledPath, RejectsMultiRate) {
  const auto modes = build_modes({1.5, 3, 4, 0.6});
  auto cfg = config(0.01, 1);
  cfg.scheme = Scheme::MultiRateOU;
  EXPECT_THROW(CoupledPath(modes, Potential::harmonic(1), cfg, CoupledPair::from_states(State(4), State(4), 2, 1)),
               std::invalid_argument);
}

TEST(CostBound, ComponentsFollowFormulas) {
  const KernelSpec spec{1.5, 3, 20, 0.6};
  const auto modes = build_modes(spec);
  const auto p = Potential::harmonic(1);
  const State X0(0.3, -0.2, std::vector<double>(20, 0.1));
  const State Xbar0(1.0, -0.5, std::vector<double>(20, 0.0));
  const double lam = 2.0, m = 1.0, g = 1.0;
  const auto b = cost_bound(X0, Xbar0, spec, modes, p, m, g, lam);
  EXPECT_DOUBLE_EQ(b.C1, 3 * 1.0 + 3 * 0.5 / lam);
  EXPECT_DOUBLE_EQ(b.C2, 4 * lam * 1.0 + 4 * 0.5);
  const double c3 = 2 * m * m / g * (std::pow(3 * lam - g / m, 2) * b.C2 * b.C2 + 4 * std::pow(lam, 4) * b.C1 * b.C1);
  EXPECT_NEAR(b.C3, c3, 1e-9 * c3);
  EXPECT_TRUE(b.regime_d);
  EXPECT_EQ(b.split_N, theta_constants(spec, modes, m, g).split_N);
  EXPECT_DOUBLE_EQ(b.kernel_l2, kernel_l2_squared(modes));
  EXPECT_DOUBLE_EQ(b.kappa_auto, 2 * b.C6);
  EXPECT_GT(b.C6, b.C3 / (2 * lam));
}

TEST(CostBound, DominatesDeterministicHarmonicCost) {
  const KernelSpec spec{1.5, 3, 20, 0.6};
  const auto modes = build_modes(spec);
  const auto p = Potential::harmonic(1);
  const State X0(0.0, 0.0, std::vector<double>(20, 0.0));
  const State Xt0(-1.0, 0.0, std::vector<double>(20, 0.0));
  const auto b = cost_bound(X0, CoupledPair::from_states(X0, Xt0, 2, 1).difference, spec, modes, p, 1, 1, 2);
  CoupledPath path(modes, p, config(0.005, 30), CoupledPair::from_states(X0, Xt0, 2, b.kappa_auto));
  RngStream rng(1, StreamDomain::Coupling, 0);
  for (int i = 0; i < 6000; ++i) path.step(rng);
  EXPECT_FALSE(path.stopped());
  EXPECT_LT(path.cost(), b.C6);
}

TEST(Experiment, IdenticalStartNeverCosts) {
  const KernelSpec spec{1.5, 3, 10, 0.6};
  const auto modes = build_modes(spec);
  const State x(0.2, 0.0, std::vector<double>(10, 0.0));
  CouplingOptions opts;
  opts.n_runs = 5;
  const auto rep = run_coupling_experiment(x, x, spec, modes, Potential::double_well(1, 1),
                                           config(0.01, 2), 2, 1.0, opts);
  EXPECT_EQ(rep.never_stopped_fraction, 1.0);
  EXPECT_EQ(rep.cost_max, 0.0);
  for (const auto& r : rep.runs) {
    for (double n : r.norms) EXPECT_EQ(n, 0.0);
  }
}

TEST(Experiment, HarmonicContraction) {
  const KernelSpec spec{3, 3, 50, 0.6};
  const auto modes = build_modes(spec);
  const auto p = Potential::harmonic(1);
  const State X0(0.0, 0.0, std::vector<double>(50, 0.0));
  const State Xt0(-1.0, 0.0, std::vector<double>(50, 0.0));
  const auto pair = CoupledPair::from_states(X0, Xt0, 2, 1);
  const auto b = cost_bound(X0, pair.difference, spec, modes, p, 1, 1, 2);
  CouplingOptions opts;
  opts.n_runs = 4;
  auto cfg = config(0.01, 10, 3);
  cfg.thin_stride = 100;
  const auto rep = run_coupling_experiment(X0, Xt0, spec, modes, p, cfg, 2, b.kappa_auto, opts);
  EXPECT_EQ(rep.never_stopped_fraction, 1.0);
  EXPECT_LT(rep.max_ratio, 1e-2);
  EXPECT_EQ(rep.runs[0].times.size(), 11u);
  // Deterministic difference: every run has the same cost.
  EXPECT_EQ(rep.cost_min, rep.cost_max);
}

TEST(ClopperPearson, EdgesAndCoverage) {
  auto [lo, hi] = clopper_pearson(200, 200, 0.95);
  EXPECT_NEAR(lo, std::pow(0.025, 1.0 / 200), 1e-12);
  EXPECT_EQ(hi, 1.0);
  std::tie(lo, hi) = clopper_pearson(0, 50, 0.9);
  EXPECT_EQ(lo, 0.0);
  EXPECT_NEAR(hi, 1 - std::pow(0.05, 1.0 / 50), 1e-12);
  // Interior: the binomial tails at the bounds equal (1 - confidence) / 2.
  const std::size_t n = 40, k = 13;
  std::tie(lo, hi) = clopper_pearson(k, n, 0.95);
  auto binom_tail_ge = [&](double p) {
    double sum = 0.0;
    for (std::size_t j = k; j <= n; ++j) {
      sum += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
                      j * std::log(p) + (n - j) * std::log1p(-p));
    }
    return sum;
  };
  auto binom_tail_le = [&](double p) { return 1.0 - binom_tail_ge(p) + std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) + (n - k) * std::log1p(-p)); };
  EXPECT_NEAR(binom_tail_ge(lo), 0.025, 1e-9);
  EXPECT_NEAR(binom_tail_le(hi), 0.025, 1e-9);
}
