#include "gle/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gle/quadrature.hpp"

namespace gle {
namespace {

double horner(const std::vector<double>& c, double x) noexcept {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

std::vector<double> derivative(const std::vector<double>& c) {
  if (c.size() <= 1) return {};
  std::vector<double> d(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = static_cast<double>(i) * c[i];
  return d;
}

double max_abs_d2(const Potential& p, double u) {
  // Dense sampling plus the endpoints; |Phi''| is a low-degree polynomial.
  constexpr int n = 400;
  double m = std::max(std::abs(p.d2phi(-u)), std::abs(p.d2phi(u)));
  for (int i = 0; i <= n; ++i) {
    const double x = -u + 2.0 * u * static_cast<double>(i) / n;
    m = std::max(m, std::abs(p.d2phi(x)));
  }
  return m;
}

}  // namespace

Potential::Potential(Kind kind, std::vector<double> coeffs, std::vector<double> params)
    : kind_(kind), coeffs_(std::move(coeffs)), params_(std::move(params)) {
  dcoeffs_ = derivative(coeffs_);
  d2coeffs_ = derivative(dcoeffs_);
}

Potential Potential::harmonic(double k_spring) {
  if (!(k_spring > 0.0) || !std::isfinite(k_spring)) {
    throw std::invalid_argument("harmonic potential needs k > 0");
  }
  return Potential(Kind::Harmonic, {0.0, 0.0, 0.5 * k_spring}, {k_spring});
}

Potential Potential::even_polynomial(std::vector<double> coeffs) {
  while (!coeffs.empty() && coeffs.back() == 0.0) coeffs.pop_back();
  if (coeffs.size() < 3 || (coeffs.size() - 1) % 2 != 0) {
    throw std::invalid_argument("even_polynomial potential needs even degree >= 2");
  }
  if (!(coeffs.back() > 0.0)) {
    throw std::invalid_argument("even_polynomial potential needs a positive leading coefficient");
  }
  for (double c : coeffs) {
    if (!std::isfinite(c)) throw std::invalid_argument("even_polynomial coefficients must be finite");
  }
  auto params = coeffs;
  return Potential(Kind::EvenPolynomial, std::move(coeffs), std::move(params));
}

Potential Potential::double_well(double a, double b) {
  if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("double_well potential needs a > 0 and finite b");
  }
  // a (x^2 - b)^2 = a b^2 - 2 a b x^2 + a x^4
  return Potential(Kind::DoubleWell, {a * b * b, 0.0, -2.0 * a * b, 0.0, a}, {a, b});
}

Potential Potential::zero() { return Potential(Kind::Zero, {0.0}, {}); }

std::string_view Potential::kind_name() const noexcept {
  switch (kind_) {
    case Kind::Harmonic: return "harmonic";
    case Kind::EvenPolynomial: return "even_polynomial";
    case Kind::DoubleWell: return "double_well";
    case Kind::Zero: break;
  }
  return "zero";
}

double Potential::phi(double x) const noexcept { return horner(coeffs_, x); }
double Potential::dphi(double x) const noexcept { return horner(dcoeffs_, x); }
double Potential::d2phi(double x) const noexcept { return horner(d2coeffs_, x); }

double Potential::dphi_difference(double x, double xbar) const noexcept {
  switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::Harmonic: return params_[0] * xbar;
    default: return dphi(x) - dphi(x - xbar);
  }
}

double eval_phi(const Potential& p, double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("eval_phi: non-finite x");
  return p.phi(x);
}

double eval_dphi(const Potential& p, double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("eval_dphi: non-finite x");
  return p.dphi(x);
}

double DerivativeBound::f(const Potential& p, double r) const {
  return max_abs_d2(p, 2.0 * std::abs(r)) + offset;
}

DerivativeBound make_derivative_bound(const Potential& p, double x_max) {
  DerivativeBound bound;
  bound.q = 1.0;
  if (!p.confining()) return bound;
  // offset = sup_x [ max_{|xi| <= 2|x|} |Phi''(xi)| - max(Phi(x), 0) ]; the
  // bracket tends to -inf for even polynomials, so a finite grid suffices.
  constexpr int n = 2000;
  double running_max = std::abs(p.d2phi(0.0));
  double prev_u = 0.0;
  double offset = running_max - std::max(p.phi(0.0), 0.0);
  for (int i = 1; i <= n; ++i) {
    const double x = x_max * static_cast<double>(i) / n;
    const double u = 2.0 * x;
    // extend the running max of |Phi''| over [prev_u, u] on both sides
    for (int j = 1; j <= 8; ++j) {
      const double xi = prev_u + (u - prev_u) * j / 8.0;
      running_max = std::max({running_max, std::abs(p.d2phi(xi)), std::abs(p.d2phi(-xi))});
    }
    prev_u = u;
    const double phi_minus = std::max(std::min(p.phi(x), p.phi(-x)), 0.0);
    offset = std::max(offset, running_max - phi_minus);
  }
  bound.offset = std::max(offset, 0.0);
  return bound;
}

AssumptionReport check_assumptions(const Potential& p, double x_max, std::size_t n_points) {
  if (!(x_max > 0.0) || !std::isfinite(x_max) || n_points < 5) {
    throw std::invalid_argument("check_assumptions: need a finite symmetric grid with >= 5 points");
  }
  AssumptionReport rep;
  rep.conforming = p.confining();
  if (!rep.conforming) rep.notes.emplace_back("zero potential violates the quadratic growth condition");

  std::vector<double> grid(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    grid[i] = -x_max + 2.0 * x_max * static_cast<double>(i) / static_cast<double>(n_points - 1);
  }
  auto ratio = [&](double x) { return x * x / (p.phi(x) + 1.0); };

  bool positive = true;
  double b = 0.0;
  for (double x : grid) {
    const double denom = p.phi(x) + 1.0;
    if (!(denom > 0.0)) {
      positive = false;
      break;
    }
    b = std::max(b, ratio(x));
  }
  rep.b_estimate = positive ? b : std::numeric_limits<double>::infinity();

  // The ratio must flatten at both ends: local log-log slope of x^2/(Phi+1)
  // at |x| = x_max below 0.1 (quadratic growth gives slope -> 0, Phi = 0 gives 2).
  auto end_slope = [&](double x_end) {
    const double h = 1e-3 * std::abs(x_end);
    const double x_in = x_end - std::copysign(h, x_end);
    return (std::log(ratio(x_end)) - std::log(ratio(x_in))) /
           (std::log(std::abs(x_end)) - std::log(std::abs(x_in)));
  };
  const bool flat = positive && end_slope(x_max) <= 0.1 && end_slope(-x_max) <= 0.1;
  rep.growth_ok = rep.conforming && std::isfinite(rep.b_estimate) && flat;
  if (rep.conforming && !rep.growth_ok) {
    rep.notes.emplace_back("ratio x^2/(Phi+1) still growing at the grid ends; widen the grid");
  }

  if (rep.conforming) {
    rep.derivative_bound = make_derivative_bound(p, std::max(x_max, 50.0));
    const auto& db = rep.derivative_bound;
    // Pairwise sampled check on a coarser sub-grid.
    const std::size_t stride = std::max<std::size_t>(1, n_points / 201);
    bool ok = true;
    for (std::size_t i = 0; i < n_points && ok; i += stride) {
      const double x = grid[i];
      const double phi_q = std::pow(std::max(p.phi(x), 0.0), db.q);
      for (std::size_t j = 0; j < n_points; j += stride) {
        const double y = grid[j];
        const double lhs = std::abs(p.dphi(x) - p.dphi(y));
        const double rhs = std::abs(x - y) * (db.f(p, x - y) + phi_q);
        if (lhs > rhs * (1.0 + 1e-12) + 1e-12) {
          ok = false;
          break;
        }
      }
    }
    rep.derivative_bound_ok = ok;

    const double L = 50.0;
    auto integrand = [&](double x) { return std::abs(p.dphi(x)) * std::exp(-p.phi(x)); };
    const double inner = integrate(integrand, -L, L);
    // Doubling the interval adds exactly the two outer pieces.
    const double outer =
        inner + integrate(integrand, -2.0 * L, -L) + integrate(integrand, L, 2.0 * L);
    rep.derivative_integral = outer;
    rep.derivative_integral_ok = std::isfinite(outer) && std::abs(outer - inner) < 1e-12;
  }
  return rep;
}

}  // namespace gle
