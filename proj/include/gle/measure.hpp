#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gle/dynamics.hpp"
#include "gle/kernel.hpp"
#include "gle/potential.hpp"
#include "gle/rng.hpp"

namespace gle {

/// k^{-2s} for k = 1..n.
std::vector<double> norm_weights(std::size_t n, double s);

/// x^2 + v^2 + sum_k w_k z_k^2 with precomputed weights.
double norm_minus_s_sq(const State& state, const std::vector<double>& weights);
double norm_minus_s(const State& state, double s);

/// The position marginal e^{-Phi(x)} / Z, with Z, moments and the CDF by
/// adaptive quadrature.
class GibbsMarginal {
 public:
  explicit GibbsMarginal(const Potential& p, double abs_tol = 1e-10);

  double normalizer() const noexcept { return z_; }
  double density(double x) const;
  /// Integral of f against the normalised density.
  double expect(const std::function<double(double)>& f) const;
  double cdf(double x) const;
  /// Support is numerically [-half_width, half_width] (density below e^{-60} outside).
  double half_width() const noexcept { return half_width_; }

 private:
  Potential p_;
  double tol_;
  double shift_ = 0.0;  // min Phi, subtracted before exponentiating
  double half_width_ = 0.0;
  double z_ = 0.0;      // normaliser of e^{-(Phi - shift)}
  std::vector<double> nodes_;
  std::vector<double> cdf_;
};

/// Exact sampler for mu = mu_x x N(0, 1/m) x N(0, 1)^N.
class GibbsSampler {
 public:
  /// envelope_b defaults to 1.1 times the b estimate of check_assumptions.
  GibbsSampler(const Potential& p, double m, std::size_t n_modes, std::uint64_t seed,
               std::optional<double> envelope_b = std::nullopt);

  double envelope_b() const noexcept { return b_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Rejection sample of x from the N(0, b/2) envelope. Throws when the
  /// acceptance rate falls below 1e-3 or the envelope is violated.
  double sample_x(RngStream& rng) const;
  State sample(RngStream& rng) const;
  /// Sample i from its own stream derived from the seed.
  State sample(std::uint64_t index) const;
  std::vector<State> sample_many(std::size_t n, unsigned threads = 1) const;

 private:
  Potential p_;
  double m_;
  std::size_t n_modes_;
  std::uint64_t seed_;
  double b_;
};

double lyapunov_psi(const State& state, const ModeSet& modes, const Potential& p, double m,
                    double s);
double lyapunov_theta(const State& state, const ModeSet& modes, const Potential& p, double m,
                      double s, std::size_t split_N);

/// Generator applied to Psi, term by term, sums truncated at N.
double generator_on_psi(const State& state, const ModeSet& modes, const Potential& p, double m,
                        double gamma, double s);

struct PsiConstants {
  double a1 = 0.0;  // truncated at N
  double a2 = 0.0;
  double a1_full = 0.0;  // infinite sums via zeta; +inf if divergent
  double a2_full = 0.0;
};

PsiConstants psi_constants(const KernelSpec& spec, const ModeSet& modes, double m, double gamma);

double generator_on_theta(const State& state, const ModeSet& modes, const Potential& p, double m,
                          double gamma, double s, std::size_t split_N);

struct ThetaConstants {
  std::size_t split_N = 0;
  bool admissible = false;      // some split_N <= N gives a1_theta > 0
  double a = 0.0;
  double a1_theta = 0.0;        // tails truncated at N
  double a1_theta_full = 0.0;   // tails summed to infinity, same split_N
  /// Smallest split with positive a1_theta for the infinite system; 0 if above 10^7.
  std::size_t split_N_full = 0;
};

/// a1_theta(split_N) with tails over split_N < k <= N.
double theta_a1(const ModeSet& modes, double m, double gamma, double s, std::size_t split_N);
/// a = gamma/m^2 + (1/m) sum_{k<=split} lambda_k + sum_{k>split} k^{-2s} lambda_k.
double theta_a(const ModeSet& modes, double m, double gamma, double s, std::size_t split_N);

/// Linear search from split_N = 1. Throws unless the spec is in regime (D)
/// with s in its admissible range.
ThetaConstants theta_constants(const KernelSpec& spec, const ModeSet& modes, double m,
                               double gamma);

struct LyapunovReport {
  double psi = 0.0;
  double theta = 0.0;
  double gen_psi = 0.0;
  double gen_theta = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double a = 0.0;
  std::size_t theta_split_N = 0;
};

/// Evaluates everything at one state; Theta fields stay zero outside regime (D).
LyapunovReport lyapunov_report(const State& state, const KernelSpec& spec, const ModeSet& modes,
                               const Potential& p, double m, double gamma);

/// sum_{k=n+1}^inf k^{-p}, p > 1.
double zeta_tail(double p, std::size_t n);

}  // namespace gle
