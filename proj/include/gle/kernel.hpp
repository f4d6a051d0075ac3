#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gle {

/// Parameters of the power-law mode family c_k = k^-(1+alpha*beta),
/// lambda_k = k^-beta, truncated at n_modes, with phase-space weight s.
struct KernelSpec {
  double alpha = 1.5;
  double beta = 3.0;
  std::size_t n_modes = 50;
  double s = 0.6;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Coupling weights and relaxation rates of the truncated mode family.
struct ModeSet {
  std::vector<double> c;
  std::vector<double> lambda;

  std::size_t size() const noexcept { return c.size(); }
  bool empty() const noexcept { return c.empty(); }

  /// First n modes (n <= size()).
  ModeSet prefix(std::size_t n) const;
};

ModeSet build_modes(const KernelSpec& spec);

/// K_N(t) = sum_k c_k exp(-lambda_k t). Throws for t < 0.
double eval_kernel(const ModeSet& modes, double t);

/// K_N(0) = sum_k c_k.
double kernel_mass(const ModeSet& modes) noexcept;

/// Upper bound on K_inf(t) - K_N(t): integral of x^-(1+alpha*beta) over [N, inf).
double truncation_tail_bound(const KernelSpec& spec);

enum class RegimeTag { Diffusive, Critical, Subdiffusive, Unclassified };

std::string_view to_string(RegimeTag tag) noexcept;

struct Regime {
  RegimeTag tag = RegimeTag::Unclassified;
  double s_lo = 0.0;  // open interval (s_lo, s_hi)
  double s_hi = 0.0;
  bool s_in_range = false;
};

Regime classify_regime(const KernelSpec& spec) noexcept;

struct TailFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Set when t_hi exceeds 0.1 / lambda_N, where the truncated sum stops
  /// looking like a power law.
  bool window_exceeds_plateau = false;
  double plateau_limit = 0.0;
};

/// Ordinary least squares of log y against log t.
TailFit fit_loglog(std::span<const double> t, std::span<const double> y);

/// Log-log slope of K_N over [t_lo, t_hi] using n_points log-spaced samples.
TailFit fit_tail_exponent(const ModeSet& modes, double t_lo, double t_hi,
                          std::size_t n_points);

std::vector<double> logspace(double lo, double hi, std::size_t n);

/// Closed form of the integral of K_N(t)^2 over [0, inf):
/// sum_j sum_k c_j c_k / (lambda_j + lambda_k).
double kernel_l2_squared(const ModeSet& modes) noexcept;

}  // namespace gle
