#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "gle/measure.hpp"
#include "gle/statistics.hpp"

using namespace gle;

namespace {

// States drawn uniformly from a box, a deliberately non-Gibbs law.
std::vector<State> box_states(std::size_t n, std::size_t n_modes, double half, std::uint64_t seed) {
  RngStream rng(seed, StreamDomain::Uniform, 0);
  std::vector<State> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    State s(n_modes);
    s.x = half * (2 * rng.uniform() - 1);
    s.v = half * (2 * rng.uniform() - 1);
    for (auto& z : s.z) z = half * (2 * rng.uniform() - 1);
    out.push_back(std::move(s));
  }
  return out;
}

double sum_pow(std::size_t n, double p) {
  long double acc = 0.0L;
  for (std::size_t k = n; k >= 1; --k) acc += std::pow(static_cast<long double>(k), -static_cast<long double>(p));
  return static_cast<double>(acc);
}

}  // namespace

TEST(Norm, Examples) {
  EXPECT_DOUBLE_EQ(norm_minus_s(State(1.0, 2.0, {1.0, 0.0, 0.0}), 0.5), std::sqrt(6.0));
  EXPECT_EQ(norm_minus_s(State(4), 0.7), 0.0);
  EXPECT_DOUBLE_EQ(norm_minus_s(State(0.0, 0.0, {0.0, 1.0}), 1.0), 0.5);
  const auto w = norm_weights(3, 0.75);
  EXPECT_DOUBLE_EQ(w[2], std::pow(3.0, -1.5));
}

TEST(Lyapunov, Examples) {
  const auto modes = build_modes({1.5, 3, 4, 0.6});
  const auto h = Potential::harmonic(1);
  EXPECT_EQ(lyapunov_psi(State(4), modes, h, 1.0, 0.6), 0.0);
  EXPECT_EQ(lyapunov_theta(State(4), modes, h, 1.0, 0.6, 2), 0.0);
  for (double m : {0.5, 1.0, 3.0}) {
    EXPECT_DOUBLE_EQ(lyapunov_psi(State(0.0, 2.0, {0, 0, 0, 0}), modes, h, m, 0.6), 2.0);
    EXPECT_DOUBLE_EQ(lyapunov_theta(State(0.0, 2.0, {0, 0, 0, 0}), modes, h, m, 0.6, 3), 2.0);
  }
  const State x(2.0, 0.0, {1.0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(lyapunov_psi(x, modes, h, 2.0, 0.5), 1.5);
  EXPECT_DOUBLE_EQ(lyapunov_theta(x, modes, h, 2.0, 0.5, 0), 1.5);
}

TEST(Generator, ValueAtOrigin) {
  const auto modes = build_modes({1.5, 3, 10, 0.7});
  const double g = generator_on_psi(State(10), modes, Potential::harmonic(1), 1, 1, 0.7);
  EXPECT_NEAR(g, 1.0 + sum_pow(10, 4.4), 1e-14);
  EXPECT_NEAR(g, 2.059, 5e-4);
  EXPECT_DOUBLE_EQ(g, psi_constants({1.5, 3, 10, 0.7}, modes, 1, 1).a2);
}

TEST(Generator, QuadraticInModes) {
  const auto modes = build_modes({1.5, 3, 6, 0.6});
  const auto p = Potential::double_well(1, 1);
  State x(0.3, 0.0, {0.5, -1.0, 0.2, 0.7, -0.3, 1.1});
  State y = x;
  for (auto& z : y.z) z *= 2;
  const double c = generator_on_psi(State(0.3, 0.0, std::vector<double>(6, 0.0)), modes, p, 1.2, 0.8, 0.6);
  const double gx = generator_on_psi(x, modes, p, 1.2, 0.8, 0.6);
  const double gy = generator_on_psi(y, modes, p, 1.2, 0.8, 0.6);
  EXPECT_NEAR(gy - c, 4 * (gx - c), 1e-12);
}

TEST(Generator, ThetaAtOriginEqualsA) {
  const KernelSpec spec{1.5, 3, 50, 0.6};
  const auto modes = build_modes(spec);
  const auto tc = theta_constants(spec, modes, 1, 1);
  EXPECT_NEAR(generator_on_theta(State(50), modes, Potential::harmonic(1), 1, 1, 0.6, tc.split_N),
              tc.a, 1e-14);
}

TEST(ThetaConstants, SplitSearch) {
  const KernelSpec spec{1.5, 3, 50, 0.6};
  const auto modes = build_modes(spec);
  const auto tc = theta_constants(spec, modes, 1, 1);
  EXPECT_TRUE(tc.admissible);
  EXPECT_GT(tc.a1_theta, 0.0);
  ASSERT_GT(tc.split_N, 1u);
  EXPECT_LE(theta_a1(modes, 1, 1, 0.6, tc.split_N - 1), 0.0);
  // Increasing in the split: every tail term is positive.
  double prev = -1e300;
  for (std::size_t n = 0; n <= 50; ++n) {
    const double a1 = theta_a1(modes, 1, 1, 0.6, n);
    EXPECT_GE(a1, prev);
    prev = a1;
  }
  EXPECT_EQ(theta_a1(modes, 1, 1, 0.6, 50), 1.0);
  EXPECT_GE(tc.split_N_full, tc.split_N);
  EXPECT_LE(tc.a1_theta_full, tc.a1_theta);
  EXPECT_THROW(theta_constants({0.5, 3, 50, 0.6}, modes, 1, 1), std::invalid_argument);
}

TEST(ZetaTail, AgainstKnownSums) {
  EXPECT_NEAR(zeta_tail(2.0, 0), std::numbers::pi * std::numbers::pi / 6, 1e-13);
  EXPECT_NEAR(zeta_tail(4.0, 0), std::pow(std::numbers::pi, 4) / 90, 1e-14);
  // Partial tails against long direct sums plus an integral remainder.
  for (double p : {1.7, 4.4, 6.1}) {
    const std::size_t big = 2000000;
    const double direct = sum_pow(big, p) - sum_pow(10, p) +
                          std::pow(big + 0.5, 1 - p) / (p - 1);
    EXPECT_NEAR(zeta_tail(p, 10), direct, 1e-11 * std::max(1.0, direct));
  }
  EXPECT_TRUE(std::isinf(zeta_tail(1.0, 3)));
}

TEST(DriftInequality, PsiOnGibbsAndBoxSamples) {
  const KernelSpec spec{1.5, 3, 50, 0.6};
  const auto modes = build_modes(spec);
  for (const auto& p : {Potential::harmonic(1), Potential::double_well(1, 1)}) {
    for (double m : {1.0, 0.5}) {
      const double gamma = 1.0;
      const auto pc = psi_constants(spec, modes, m, gamma);
      EXPECT_LE(pc.a1, pc.a1_full);
      EXPECT_LE(pc.a2, pc.a2_full);
      GibbsSampler sampler(p, m, 50, 3);
      auto states = sampler.sample_many(2000);
      const auto box = box_states(2000, 50, 20.0, 4);
      states.insert(states.end(), box.begin(), box.end());
      std::size_t violations = 0;
      for (const auto& x : states) {
        const double lhs = generator_on_psi(x, modes, p, m, gamma, spec.s);
        const double rhs = pc.a1 * lyapunov_psi(x, modes, p, m, spec.s) + pc.a2;
        violations += lhs > rhs;
      }
      EXPECT_EQ(violations, 0u);
    }
  }
}

TEST(DriftInequality, ThetaOnGibbsAndBoxSamples) {
  const KernelSpec spec{1.5, 3, 50, 0.6};
  const auto modes = build_modes(spec);
  const auto tc = theta_constants(spec, modes, 1, 1);
  for (const auto& p : {Potential::harmonic(1), Potential::double_well(1, 1)}) {
    GibbsSampler sampler(p, 1.0, 50, 5);
    auto states = sampler.sample_many(2000);
    const auto box = box_states(2000, 50, 20.0, 6);
    states.insert(states.end(), box.begin(), box.end());
    std::size_t violations = 0;
    for (const auto& x : states) {
      violations += generator_on_theta(x, modes, p, 1, 1, spec.s, tc.split_N) > tc.a;
    }
    EXPECT_EQ(violations, 0u);
  }
}

TEST(GibbsMarginal, HarmonicIsStandardNormal) {
  const auto p = Potential::harmonic(1);
  GibbsMarginal g(p);
  EXPECT_NEAR(g.normalizer(), std::sqrt(2 * std::numbers::pi), 1e-9);
  for (double x : {-3.0, -1.0, 0.0, 0.4, 2.5}) EXPECT_NEAR(g.cdf(x), normal_cdf(x), 1e-9);
  EXPECT_NEAR(g.expect([](double x) { return x * x; }), 1.0, 1e-9);
}

TEST(GibbsMarginal, DoubleWellIsSymmetric) {
  const auto p = Potential::double_well(1, 1);
  GibbsMarginal g(p);
  EXPECT_NEAR(g.cdf(0.0), 0.5, 1e-9);
  EXPECT_NEAR(g.cdf(-1.3) + g.cdf(1.3), 1.0, 1e-9);
  EXPECT_NEAR(g.expect([](double x) { return x; }), 0.0, 1e-10);
  EXPECT_NEAR(g.density(0.7), std::exp(-p.phi(0.7)) / g.normalizer(), 1e-12);
}

TEST(GibbsSampler, HarmonicKs) {
  const auto p = Potential::harmonic(1);
  GibbsSampler sampler(p, 1.0, 1, 10);
  std::vector<double> xs;
  for (const auto& s : sampler.sample_many(100000)) xs.push_back(s.x);
  EXPECT_LT(ks_statistic(xs, [](double x) { return normal_cdf(x); }), 0.01);
}

TEST(GibbsSampler, VelocityVarianceIsInverseMass) {
  GibbsSampler sampler(Potential::harmonic(1), 4.0, 1, 11);
  const std::size_t n = 100000;
  double s2 = 0.0;
  for (const auto& s : sampler.sample_many(n)) s2 += s.v * s.v;
  const double est = s2 / n;
  // sd of the mean of v^2 for v ~ N(0, 1/4) is sqrt(2/n)/4
  EXPECT_LT(std::abs(est - 0.25), 3 * std::sqrt(2.0 / n) / 4);
}

TEST(GibbsSampler, DoubleWellHistogram) {
  const auto p = Potential::double_well(1, 1);
  GibbsMarginal g(p);
  GibbsSampler sampler(p, 1.0, 1, 12);
  std::vector<double> xs;
  for (const auto& s : sampler.sample_many(100000)) xs.push_back(s.x);
  EXPECT_LT(l1_histogram_distance(xs, [&](double x) { return g.cdf(x); }, -3, 3, 100), 0.05);
}

TEST(GibbsSampler, MomentsAndNorm) {
  const std::size_t N = 40, n = 40000;
  const double s = 0.6, m = 2.0;
  const auto p = Potential::double_well(1, 1);
  GibbsMarginal g(p);
  const double ex2 = g.expect([](double x) { return x * x; });
  GibbsSampler sampler(p, m, N, 13);
  const auto states = sampler.sample_many(n);
  const auto w = norm_weights(N, s);
  auto check = [&](auto f, double target) {
    double a = 0.0, b = 0.0;
    for (const auto& st : states) {
      const double v = f(st);
      a += v;
      b += v * v;
    }
    const double mean = a / n;
    const double se = std::sqrt((b / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean - target), 3.5 * se) << "target " << target;
  };
  check([](const State& st) { return st.x * st.x; }, ex2);
  check([](const State& st) { return st.v * st.v; }, 1.0 / m);
  for (std::size_t k : {std::size_t{0}, N / 2 - 1, N - 1}) {
    check([k](const State& st) { return st.z[k] * st.z[k]; }, 1.0);
  }
  double norm_target = ex2 + 1.0 / m;
  for (double wk : w) norm_target += wk;
  check([&](const State& st) { return norm_minus_s_sq(st, w); }, norm_target);
}

TEST(GibbsSampler, Reproducible) {
  GibbsSampler a(Potential::double_well(1, 1), 1.0, 5, 77);
  GibbsSampler b(Potential::double_well(1, 1), 1.0, 5, 77);
  EXPECT_EQ(a.sample(3), b.sample(3));
  EXPECT_EQ(a.sample_many(50, 1), b.sample_many(50, 4));
  EXPECT_THROW(GibbsSampler(Potential::zero(), 1.0, 5, 1), std::invalid_argument);
}

TEST(LyapunovReport, ThetaOnlyInDiffusiveRegime) {
  const KernelSpec sd{0.5, 3, 10, 0.6};
  const auto modes = build_modes(sd);
  const auto rep = lyapunov_report(State(10), sd, modes, Potential::harmonic(1), 1, 1);
  EXPECT_EQ(rep.theta_split_N, 0u);
  EXPECT_GT(rep.a2, 0.0);
}
