#include "gle/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "gle/quadrature.hpp"

namespace gle {

std::vector<double> norm_weights(std::size_t n, double s) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = std::pow(static_cast<double>(k + 1), -2.0 * s);
  return w;
}

double norm_minus_s_sq(const State& state, const std::vector<double>& weights) {
  double acc = state.x * state.x + state.v * state.v;
  const std::size_t n = std::min(weights.size(), state.z.size());
  for (std::size_t k = 0; k < n; ++k) acc += weights[k] * state.z[k] * state.z[k];
  return acc;
}

double norm_minus_s(const State& state, double s) {
  return std::sqrt(norm_minus_s_sq(state, norm_weights(state.n_modes(), s)));
}

double zeta_tail(double p, std::size_t n) {
  if (!(p > 1.0)) return std::numeric_limits<double>::infinity();
  // Direct sum up to K - 1, then Euler-Maclaurin from K on.
  const std::size_t K = std::max<std::size_t>(n + 1, 20);
  double direct = 0.0;
  for (std::size_t k = K - 1; k > n; --k) direct += std::pow(static_cast<double>(k), -p);
  const double x = static_cast<double>(K);
  const double xp = std::pow(x, -p);
  const double em = x * xp / (p - 1.0) + 0.5 * xp + p * xp / (12.0 * x) -
                    p * (p + 1.0) * (p + 2.0) * xp / (720.0 * x * x * x) +
                    p * (p + 1.0) * (p + 2.0) * (p + 3.0) * (p + 4.0) * xp /
                        (30240.0 * x * x * x * x * x);
  return direct + em;
}

GibbsMarginal::GibbsMarginal(const Potential& p, double abs_tol) : p_(p), tol_(abs_tol) {
  if (!p.confining()) throw std::invalid_argument("GibbsMarginal: potential is not confining");
  // Minimum of Phi on a coarse grid, then the width where Phi - min exceeds 60.
  double lo = std::numeric_limits<double>::infinity();
  for (int i = -2000; i <= 2000; ++i) lo = std::min(lo, p.phi(0.01 * i));
  shift_ = lo;
  double L = 0.0;
  while (L < 1e4 && (p.phi(L) - shift_ < 60.0 || p.phi(-L) - shift_ < 60.0)) L += 0.01;
  half_width_ = L;

  auto g = [this](double x) { return std::exp(-(p_.phi(x) - shift_)); };
  constexpr std::size_t n_nodes = 2001;
  nodes_.resize(n_nodes);
  cdf_.assign(n_nodes, 0.0);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    nodes_[i] = -L + 2.0 * L * static_cast<double>(i) / (n_nodes - 1);
  }
  const double piece_tol = tol_ / static_cast<double>(n_nodes);
  for (std::size_t i = 1; i < n_nodes; ++i) {
    cdf_[i] = cdf_[i - 1] + integrate(g, nodes_[i - 1], nodes_[i], piece_tol);
  }
  z_ = cdf_.back();
  for (auto& c : cdf_) c /= z_;
  z_ *= std::exp(-shift_);
}

double GibbsMarginal::density(double x) const { return std::exp(-p_.phi(x)) / z_; }

double GibbsMarginal::expect(const std::function<double(double)>& f) const {
  const double scale = std::exp(-shift_) / z_;
  auto g = [&](double x) { return f(x) * std::exp(-(p_.phi(x) - shift_)) * scale; };
  return integrate(g, -half_width_, half_width_, tol_);
}

double GibbsMarginal::cdf(double x) const {
  if (x <= nodes_.front()) return 0.0;
  if (x >= nodes_.back()) return 1.0;
  const double h = nodes_[1] - nodes_[0];
  const auto i = std::min<std::size_t>(static_cast<std::size_t>((x - nodes_.front()) / h),
                                       nodes_.size() - 2);
  // Cubic Hermite on [x_i, x_{i+1}] with the density as the derivative.
  const double x0 = nodes_[i];
  const double t = (x - x0) / h;
  const double d0 = density(x0) * h;
  const double d1 = density(nodes_[i + 1]) * h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double v = (2 * t3 - 3 * t2 + 1) * cdf_[i] + (t3 - 2 * t2 + t) * d0 +
                   (-2 * t3 + 3 * t2) * cdf_[i + 1] + (t3 - t2) * d1;
  return std::clamp(v, 0.0, 1.0);
}

GibbsSampler::GibbsSampler(const Potential& p, double m, std::size_t n_modes, std::uint64_t seed,
                           std::optional<double> envelope_b)
    : p_(p), m_(m), n_modes_(n_modes), seed_(seed) {
  if (!(m > 0.0)) throw std::invalid_argument("GibbsSampler: m must be > 0");
  if (!p.confining()) {
    throw std::invalid_argument("GibbsSampler: the zero potential has no Gibbs marginal");
  }
  if (envelope_b) {
    b_ = *envelope_b;
  } else {
    const auto rep = check_assumptions(p);
    if (!rep.growth_ok) {
      throw std::invalid_argument("GibbsSampler: potential fails the quadratic growth check");
    }
    b_ = 1.1 * rep.b_estimate;
  }
  if (!(b_ > 0.0) || !std::isfinite(b_)) {
    throw std::invalid_argument("GibbsSampler: envelope b must be positive and finite");
  }
}

double GibbsSampler::sample_x(RngStream& rng) const {
  // b (Phi + 1) >= x^2 gives e^{-Phi(x)} <= e^{1 - x^2 / b}.
  constexpr int max_attempts = 20000;
  const double sd = std::sqrt(0.5 * b_);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const double x = sd * rng.normal();
    const double log_ratio = -p_.phi(x) - 1.0 + x * x / b_;
    if (log_ratio > 1e-12) {
      throw std::runtime_error("GibbsSampler: envelope violated at x = " + std::to_string(x) +
                               "; increase b");
    }
    if (rng.uniform() < std::exp(log_ratio)) return x;
  }
  throw std::runtime_error(
      "GibbsSampler: rejection acceptance rate below 1e-3; increase the envelope b");
}

State GibbsSampler::sample(RngStream& rng) const {
  State s(n_modes_);
  s.x = sample_x(rng);
  s.v = rng.normal() / std::sqrt(m_);
  for (auto& q : s.z) q = rng.normal();
  return s;
}

State GibbsSampler::sample(std::uint64_t index) const {
  RngStream rng(seed_, StreamDomain::GibbsSampling, index);
  return sample(rng);
}

std::vector<State> GibbsSampler::sample_many(std::size_t n, unsigned threads) const {
  std::vector<State> out(n);
  parallel_for(n, threads, [&](std::size_t i) { out[i] = sample(i); });
  return out;
}

namespace {

void check_dims(const State& state, const ModeSet& modes) {
  if (state.n_modes() != modes.size()) {
    throw std::invalid_argument("state has " + std::to_string(state.n_modes()) +
                                " modes but the mode set has " + std::to_string(modes.size()));
  }
}

}  // namespace

double lyapunov_psi(const State& state, const ModeSet& modes, const Potential& p, double m,
                    double s) {
  check_dims(state, modes);
  double acc = 0.0;
  for (std::size_t k = 0; k < state.z.size(); ++k) {
    acc += std::pow(static_cast<double>(k + 1), -2.0 * s) * state.z[k] * state.z[k];
  }
  return p.phi(state.x) / m + 0.5 * state.v * state.v + 0.5 * acc;
}

double lyapunov_theta(const State& state, const ModeSet& modes, const Potential& p, double m,
                      double s, std::size_t split_N) {
  check_dims(state, modes);
  if (split_N > modes.size()) throw std::invalid_argument("split_N exceeds the number of modes");
  double head = 0.0;
  double tail = 0.0;
  for (std::size_t k = 0; k < state.z.size(); ++k) {
    const double z2 = state.z[k] * state.z[k];
    if (k < split_N) {
      head += z2;
    } else {
      tail += std::pow(static_cast<double>(k + 1), -2.0 * s) * z2;
    }
  }
  return p.phi(state.x) / m + 0.5 * state.v * state.v + head / (2.0 * m) + 0.5 * tail;
}

double generator_on_psi(const State& state, const ModeSet& modes, const Potential& p, double m,
                        double gamma, double s) {
  (void)p;  // the Phi' terms cancel
  check_dims(state, modes);
  const double v = state.v;
  double acc = -(gamma / m) * v * v + gamma / (m * m);
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double w = std::pow(static_cast<double>(k + 1), -2.0 * s);
    const double z = state.z[k];
    const double sc = std::sqrt(modes.c[k]);
    acc += -modes.lambda[k] * w * z * z - sc * z * v / m + sc * w * z * v + w * modes.lambda[k];
  }
  return acc;
}

PsiConstants psi_constants(const KernelSpec& spec, const ModeSet& modes, double m, double gamma) {
  const double s = spec.s;
  double sum_c_up = 0.0;
  double sum_c_down = 0.0;
  double sum_lam = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double kk = static_cast<double>(k + 1);
    sum_c_up += modes.c[k] * std::pow(kk, 2.0 * s);
    sum_c_down += modes.c[k] * std::pow(kk, -2.0 * s);
    sum_lam += std::pow(kk, -2.0 * s) * modes.lambda[k];
  }
  PsiConstants out;
  out.a1 = std::max(1.0 + 1.0 / m, sum_c_up / m + sum_c_down);
  out.a2 = gamma / (m * m) + sum_lam;
  const double ab = spec.alpha * spec.beta;
  out.a1_full = std::max(1.0 + 1.0 / m,
                         zeta_tail(1.0 + ab - 2.0 * s, 0) / m + zeta_tail(1.0 + ab + 2.0 * s, 0));
  out.a2_full = gamma / (m * m) + zeta_tail(2.0 * s + spec.beta, 0);
  return out;
}

double generator_on_theta(const State& state, const ModeSet& modes, const Potential& p, double m,
                          double gamma, double s, std::size_t split_N) {
  (void)p;
  check_dims(state, modes);
  if (split_N > modes.size()) throw std::invalid_argument("split_N exceeds the number of modes");
  const double v = state.v;
  double acc = -(gamma / m) * v * v + gamma / (m * m);
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double z = state.z[k];
    const double lam = modes.lambda[k];
    if (k < split_N) {
      acc += (lam - lam * z * z) / m;
    } else {
      const double w = std::pow(static_cast<double>(k + 1), -2.0 * s);
      const double sc = std::sqrt(modes.c[k]);
      acc += -lam * w * z * z - sc * z * v / m + sc * w * z * v + w * lam;
    }
  }
  return acc;
}

double theta_a1(const ModeSet& modes, double m, double gamma, double s, std::size_t split_N) {
  double t1 = 0.0;
  double t2 = 0.0;
  for (std::size_t k = split_N; k < modes.size(); ++k) {
    const double w = std::pow(static_cast<double>(k + 1), -2.0 * s);
    t1 += modes.c[k] / (w * modes.lambda[k]);
    t2 += w * modes.c[k] / modes.lambda[k];
  }
  return 1.0 - t1 / (gamma * m) - (m / gamma) * t2;
}

double theta_a(const ModeSet& modes, double m, double gamma, double s, std::size_t split_N) {
  double acc = gamma / (m * m);
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (k < split_N) {
      acc += modes.lambda[k] / m;
    } else {
      acc += std::pow(static_cast<double>(k + 1), -2.0 * s) * modes.lambda[k];
    }
  }
  return acc;
}

ThetaConstants theta_constants(const KernelSpec& spec, const ModeSet& modes, double m,
                               double gamma) {
  const Regime r = classify_regime(spec);
  if (r.tag != RegimeTag::Diffusive || !r.s_in_range) {
    throw std::invalid_argument(
        "Theta bound needs regime (D): alpha > 1, beta > 1/(alpha-1), 1/2 < s < (alpha-1)beta/2");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("Theta bound needs gamma > 0");
  const double s = spec.s;
  ThetaConstants out;
  for (std::size_t n = 1; n <= modes.size(); ++n) {
    if (theta_a1(modes, m, gamma, s, n) > 0.0) {
      out.split_N = n;
      out.admissible = true;
      break;
    }
  }
  if (!out.admissible) out.split_N = modes.size();
  out.a = theta_a(modes, m, gamma, s, out.split_N);
  out.a1_theta = theta_a1(modes, m, gamma, s, out.split_N);

  // c_k / (k^{-2s} lambda_k) = k^{-p1}, k^{-2s} c_k / lambda_k = k^{-p2}
  const double ab = spec.alpha * spec.beta;
  const double p1 = 1.0 + ab - 2.0 * s - spec.beta;
  const double p2 = 1.0 + ab + 2.0 * s - spec.beta;
  auto full = [&](std::size_t n) {
    return 1.0 - zeta_tail(p1, n) / (gamma * m) - (m / gamma) * zeta_tail(p2, n);
  };
  out.a1_theta_full = full(out.split_N);
  // a1_full is increasing in n: doubling then bisection.
  constexpr std::size_t cap = 10'000'000;
  std::size_t hi = 1;
  while (hi < cap && !(full(hi) > 0.0)) hi *= 2;
  if (full(hi) > 0.0) {
    std::size_t lo = hi / 2;  // full(lo) <= 0 unless hi == 1
    if (hi == 1) {
      out.split_N_full = 1;
    } else {
      while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (full(mid) > 0.0 ? hi : lo) = mid;
      }
      out.split_N_full = hi;
    }
  }
  return out;
}

LyapunovReport lyapunov_report(const State& state, const KernelSpec& spec, const ModeSet& modes,
                               const Potential& p, double m, double gamma) {
  LyapunovReport rep;
  rep.psi = lyapunov_psi(state, modes, p, m, spec.s);
  rep.gen_psi = generator_on_psi(state, modes, p, m, gamma, spec.s);
  const auto pc = psi_constants(spec, modes, m, gamma);
  rep.a1 = pc.a1;
  rep.a2 = pc.a2;
  const Regime r = classify_regime(spec);
  if (r.tag == RegimeTag::Diffusive && r.s_in_range && gamma > 0.0) {
    const auto tc = theta_constants(spec, modes, m, gamma);
    rep.theta_split_N = tc.split_N;
    rep.a = tc.a;
    rep.theta = lyapunov_theta(state, modes, p, m, spec.s, tc.split_N);
    rep.gen_theta = generator_on_theta(state, modes, p, m, gamma, spec.s, tc.split_N);
  }
  return rep;
}

}  // namespace gle
