#include "gle/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace gle {

void KernelSpec::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("kernel.alpha must satisfy alpha > 0");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("kernel.beta must satisfy beta > 0");
  }
  if (n_modes == 0) {
    throw std::invalid_argument("kernel.n_modes must be at least 1");
  }
  if (!(s > 0.5) || !std::isfinite(s)) {
    throw std::invalid_argument("kernel.s must satisfy s > 1/2");
  }
}

ModeSet ModeSet::prefix(std::size_t n) const {
  if (n > size()) {
    throw std::invalid_argument("ModeSet::prefix: n exceeds the number of modes");
  }
  ModeSet out;
  out.c.assign(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n));
  out.lambda.assign(lambda.begin(), lambda.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

ModeSet build_modes(const KernelSpec& spec) {
  if (spec.n_modes == 0) {
    throw std::invalid_argument("build_modes: n_modes must be at least 1");
  }
  if (!(spec.alpha > 0.0) || !(spec.beta > 0.0)) {
    throw std::invalid_argument("build_modes: alpha and beta must be positive");
  }
  ModeSet modes;
  modes.c.resize(spec.n_modes);
  modes.lambda.resize(spec.n_modes);
  const double c_exp = -(1.0 + spec.alpha * spec.beta);
  for (std::size_t i = 0; i < spec.n_modes; ++i) {
    const double k = static_cast<double>(i + 1);
    modes.c[i] = std::pow(k, c_exp);
    modes.lambda[i] = std::pow(k, -spec.beta);
  }
  return modes;
}

double eval_kernel(const ModeSet& modes, double t) {
  if (!(t >= 0.0)) {
    throw std::invalid_argument("eval_kernel: t must be non-negative");
  }
  double sum = 0.0;
  // Smallest terms first keeps the sum accurate for large N.
  for (std::size_t i = modes.size(); i-- > 0;) {
    sum += modes.c[i] * std::exp(-modes.lambda[i] * t);
  }
  return sum;
}

double kernel_mass(const ModeSet& modes) noexcept {
  double sum = 0.0;
  for (std::size_t i = modes.size(); i-- > 0;) sum += modes.c[i];
  return sum;
}

double truncation_tail_bound(const KernelSpec& spec) {
  const double ab = spec.alpha * spec.beta;
  return std::pow(static_cast<double>(spec.n_modes), -ab) / ab;
}

std::string_view to_string(RegimeTag tag) noexcept {
  switch (tag) {
    case RegimeTag::Diffusive: return "Diffusive";
    case RegimeTag::Critical: return "Critical";
    case RegimeTag::Subdiffusive: return "Subdiffusive";
    case RegimeTag::Unclassified: break;
  }
  return "Unclassified";
}

Regime classify_regime(const KernelSpec& spec) noexcept {
  Regime r;
  const double a = spec.alpha;
  const double b = spec.beta;
  if (a > 1.0 && b > 1.0 / (a - 1.0)) {
    r.tag = RegimeTag::Diffusive;
    r.s_lo = 0.5;
    r.s_hi = (a - 1.0) * b / 2.0;
  } else if (a == 1.0 && b > 1.0) {
    r.tag = RegimeTag::Critical;
    r.s_lo = 0.5;
    r.s_hi = b / 2.0;
  } else if (a > 0.0 && a < 1.0 && b > 1.0 / a) {
    r.tag = RegimeTag::Subdiffusive;
    r.s_lo = 0.5;
    r.s_hi = a * b / 2.0;
  }
  r.s_in_range = r.tag != RegimeTag::Unclassified && spec.s > r.s_lo && spec.s < r.s_hi;
  return r;
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) {
    throw std::invalid_argument("logspace: need 0 < lo < hi and n >= 2");
  }
  std::vector<double> out(n);
  const double a = std::log(lo);
  const double step = (std::log(hi) - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + step * static_cast<double>(i));
  out.front() = lo;
  out.back() = hi;
  return out;
}

TailFit fit_loglog(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size() || t.size() < 2) {
    throw std::invalid_argument("fit_loglog: need at least two aligned points");
  }
  const double n = static_cast<double>(t.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || !(y[i] > 0.0)) {
      throw std::invalid_argument("fit_loglog: points must be strictly positive");
    }
    mx += std::log(t[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double dx = std::log(t[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  TailFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

TailFit fit_tail_exponent(const ModeSet& modes, double t_lo, double t_hi,
                          std::size_t n_points) {
  if (!(t_lo > 0.0)) {
    throw std::invalid_argument("fit_tail_exponent: window must not contain t <= 0");
  }
  if (!(t_hi > t_lo)) {
    throw std::invalid_argument("fit_tail_exponent: window upper end must exceed lower end");
  }
  if (n_points < 10) {
    throw std::invalid_argument("fit_tail_exponent: n_points must be at least 10");
  }
  if (modes.empty()) {
    throw std::invalid_argument("fit_tail_exponent: empty mode set");
  }
  const auto ts = logspace(t_lo, t_hi, n_points);
  std::vector<double> ks(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) ks[i] = eval_kernel(modes, ts[i]);
  TailFit fit = fit_loglog(ts, ks);
  fit.plateau_limit = 0.1 / modes.lambda.back();
  fit.window_exceeds_plateau = t_hi > fit.plateau_limit;
  return fit;
}

double kernel_l2_squared(const ModeSet& modes) noexcept {
  double sum = 0.0;
  const std::size_t n = modes.size();
  for (std::size_t j = 0; j < n; ++j) {
    sum += modes.c[j] * modes.c[j] / (2.0 * modes.lambda[j]);
    for (std::size_t k = j + 1; k < n; ++k) {
      sum += 2.0 * modes.c[j] * modes.c[k] / (modes.lambda[j] + modes.lambda[k]);
    }
  }
  return sum;
}

}  // namespace gle
