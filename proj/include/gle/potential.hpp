#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gle {

/// Confining potential well. Every built-in kind is a polynomial, stored as
/// ascending-power coefficients, so value and derivatives are exact Horner
/// evaluations.
class Potential {
 public:
  enum class Kind { Harmonic, EvenPolynomial, DoubleWell, Zero };

  /// Phi(x) = k x^2 / 2, k > 0.
  static Potential harmonic(double k_spring);
  /// Phi(x) = sum_i coeffs[i] x^i; even degree >= 2, positive leading coefficient.
  static Potential even_polynomial(std::vector<double> coeffs);
  /// Phi(x) = a (x^2 - b)^2, a > 0.
  static Potential double_well(double a, double b);
  /// Phi = 0. Admitted for free-particle MSD runs only; violates the growth condition.
  static Potential zero();

  Kind kind() const noexcept { return kind_; }
  std::string_view kind_name() const noexcept;

  double phi(double x) const noexcept;
  double dphi(double x) const noexcept;
  double d2phi(double x) const noexcept;

  /// Phi'(x) - Phi'(x - xbar). Exactly k * xbar for the harmonic well, so the
  /// difference never picks up rounding from x.
  double dphi_difference(double x, double xbar) const noexcept;

  bool linear_force() const noexcept { return kind_ == Kind::Harmonic || kind_ == Kind::Zero; }
  /// False only for Zero.
  bool confining() const noexcept { return kind_ != Kind::Zero; }
  int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }

  const std::vector<double>& coefficients() const noexcept { return coeffs_; }
  /// Constructor parameters: {k} for Harmonic, {a, b} for DoubleWell,
  /// the coefficient list for EvenPolynomial, empty for Zero.
  const std::vector<double>& parameters() const noexcept { return params_; }

 private:
  Potential(Kind kind, std::vector<double> coeffs, std::vector<double> params);

  Kind kind_;
  std::vector<double> coeffs_;
  std::vector<double> dcoeffs_;
  std::vector<double> d2coeffs_;
  std::vector<double> params_;
};

/// Checked evaluation: throws std::invalid_argument for non-finite x.
double eval_phi(const Potential& p, double x);
double eval_dphi(const Potential& p, double x);

/// Concrete choice of (f, q) for the derivative regularity condition
/// |Phi'(x) - Phi'(y)| <= |x - y| (f(x - y) + Phi(x)^q):
/// q = 1 and f(r) = max_{|xi| <= 2|r|} |Phi''(xi)| + offset.
struct DerivativeBound {
  double q = 1.0;
  double offset = 0.0;

  double f(const Potential& p, double r) const;
};

struct AssumptionReport {
  bool conforming = false;          // not the Zero potential
  double b_estimate = 0.0;          // max over grid of x^2 / (Phi(x) + 1)
  bool growth_ok = false;
  bool derivative_bound_ok = false;
  DerivativeBound derivative_bound;
  double derivative_integral = 0.0;  // int |Phi'| e^{-Phi} dx
  bool derivative_integral_ok = false;
  std::vector<std::string> notes;
};

/// Sampled check of the growth and regularity conditions on a symmetric grid
/// [-x_max, x_max] with n_points nodes.
AssumptionReport check_assumptions(const Potential& p, double x_max = 10.0,
                                   std::size_t n_points = 2001);

/// Builds the (f, q) pair used by check_assumptions and the coupling cost bound.
DerivativeBound make_derivative_bound(const Potential& p, double x_max = 50.0);

}  // namespace gle
