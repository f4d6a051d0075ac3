#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gle/dynamics.hpp"
#include "gle/kernel.hpp"
#include "gle/potential.hpp"
#include "gle/rng.hpp"

namespace gle {

/// Difference X - X~ in closed form, or measured along a simulated pair.
struct DifferenceDiagnostics {
  double xbar = 0.0;
  double vbar = 0.0;
  std::vector<double> zbar;
  double zbar_norm = 0.0;  // sqrt(sum k^{-2s} zbar_k^2)
  double full_norm = 0.0;  // ||Xbar||_{-s}
};

/// lambda_1 + 1 (= 2 for this mode family).
double default_lambda(const ModeSet& modes);
/// Throws unless lambda > lambda_k for every k.
void validate_lambda(const ModeSet& modes, double lambda_ctrl);

/// Control in terms of the difference: xbar = x - x~ etc.; x is the primary position.
double control_u0_diff(double x, double xbar, double vbar, const std::vector<double>& zbar,
                       const ModeSet& modes, const Potential& p, double m, double gamma,
                       double lambda_ctrl);

double control_u0(const State& X, const State& Xt, const ModeSet& modes, const Potential& p,
                  double m, double gamma, double lambda_ctrl);

/// Primary X and the difference Xbar = X - X~; the shifted path is X - Xbar.
struct CoupledPair {
  State primary;
  State difference;
  double girsanov_cost = 0.0;
  bool stopped = false;
  double lambda_ctrl = 2.0;
  double kappa = 1.0;

  static CoupledPair from_states(const State& X, const State& Xt, double lambda_ctrl,
                                 double kappa);
  State shifted() const;
};

/// Advances a coupled pair. The primary path is stepped exactly as by
/// Propagator (same scheme, same draws); the difference follows the same
/// scheme without noise plus the control shift, so it never reads the RNG.
/// MultiRateOU is not supported here.
class CoupledPath {
 public:
  CoupledPath(const ModeSet& modes, const Potential& potential, const SimConfig& cfg,
              CoupledPair pair);

  void step(RngStream& rng);

  const CoupledPair& pair() const;
  double time() const noexcept { return prop_.time(); }
  /// Control value applied in the last step (0 once stopped).
  double last_u0() const noexcept { return last_u0_; }
  /// ||Xbar||_{-s}^2 with the given weights.
  double difference_norm_sq(const std::vector<double>& weights) const;
  double x() const noexcept { return prop_.x(); }
  bool stopped() const noexcept { return pair_.stopped; }
  double cost() const noexcept { return pair_.girsanov_cost; }

 private:
  ModeSet modes_;
  Potential potential_;
  SimConfig cfg_;
  Propagator prop_;
  mutable CoupledPair pair_;
  std::vector<double> sqrt_c_;
  std::vector<double> decay_;
  std::vector<double> gain_;
  double last_u0_ = 0.0;
};

CoupledPair coupled_step(const CoupledPair& pair, const ModeSet& modes, const Potential& p,
                         const SimConfig& cfg, RngStream& rng);

/// Closed-form solution of the controlled difference system
/// dxbar = vbar, dvbar = -3 lambda vbar - 2 lambda^2 xbar, dzbar_k = -lambda_k zbar_k + sqrt(c_k) vbar.
DifferenceDiagnostics difference_ode_exact(double xbar0, double vbar0,
                                           const std::vector<double>& zbar0,
                                           const ModeSet& modes, double lambda_ctrl, double t,
                                           double s);

/// Pieces of the explicit upper bound on the total Girsanov cost.
struct CostBound {
  double C1 = 0.0, C2 = 0.0, C3 = 0.0, C4 = 0.0, C5 = 0.0, C6 = 0.0;
  double kernel_l2 = 0.0;    // integral of K^2
  double theta0 = 0.0;       // Theta(X0)
  double a = 0.0;
  std::size_t split_N = 0;
  bool regime_d = false;     // Theta constants from the regime-(D) search
  double R = 1.0;
  double f_C1 = 0.0;
  double kappa_auto = 0.0;   // 2 * C6
};

CostBound cost_bound(const State& X0, const State& Xbar0, const KernelSpec& spec,
                     const ModeSet& modes, const Potential& p, double m, double gamma,
                     double lambda_ctrl, double R = 1.0);

struct CouplingRun {
  double initial_norm = 0.0;
  double final_norm = 0.0;
  double cost = 0.0;
  bool stopped = false;
  double stop_time = 0.0;          // valid when stopped
  double sup_scaled_excess = 0.0;  // sup_t e^{-eta t} Phi(x)/m - Theta(X0) - a/eta
  std::vector<double> times;       // thinned curve
  std::vector<double> norms;
  std::vector<double> costs;
};

struct CouplingOptions {
  std::size_t n_runs = 1;
  unsigned threads = 1;
  double eta = 1.0;  // rate in the tail diagnostic
  double confidence = 0.95;
  std::size_t curve_stride = 0;  // 0: use cfg.thin_stride
};

struct CouplingReport {
  std::vector<CouplingRun> runs;
  double never_stopped_fraction = 0.0;
  double ci_lo = 0.0;  // Clopper-Pearson
  double ci_hi = 0.0;
  double max_ratio = 0.0;  // max over runs of final / initial norm
  double cost_min = 0.0, cost_median = 0.0, cost_max = 0.0;
  RegimeTag regime = RegimeTag::Unclassified;
  bool regime_recommended = false;
  double lambda_ctrl = 0.0;
  double kappa = 0.0;
  /// Tail diagnostic: thresholds r, fraction of runs with excess > r, and the
  /// least-squares rate of log(fraction) against r (NaN when fewer than two
  /// positive fractions).
  std::vector<double> tail_thresholds;
  std::vector<double> tail_fractions;
  double tail_rate = 0.0;
};

/// Run i draws its noise from (cfg.seed, Coupling, i).
CouplingReport run_coupling_experiment(const State& X0, const State& Xt0, const KernelSpec& spec,
                                       const ModeSet& modes, const Potential& p,
                                       const SimConfig& cfg, double lambda_ctrl, double kappa,
                                       const CouplingOptions& opts = {});

/// Two-sided Clopper-Pearson interval for k successes in n trials.
std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double confidence);

}  // namespace gle
