#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gle/dynamics.hpp"
#include "gle/kernel.hpp"
#include "gle/measure.hpp"
#include "gle/potential.hpp"

namespace gle {

double normal_cdf(double x, double mean = 0.0, double sd = 1.0);

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and `cdf`.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

/// L1 distance between the histogram density on [lo, hi] with n_bins bins and
/// the target bin masses; mass outside [lo, hi] is compared as one extra bin.
double l1_histogram_distance(std::span<const double> samples,
                             const std::function<double(double)>& cdf, double lo, double hi,
                             std::size_t n_bins);

struct MarginalTest {
  double ks_stat = 0.0;
  double l1_hist = 0.0;
  std::size_t n = 0;
};

/// KS and histogram distance; needs at least 1000 samples.
MarginalTest marginal_test(std::span<const double> samples,
                           const std::function<double(double)>& cdf, double lo = -3.0,
                           double hi = 3.0, std::size_t n_bins = 100);

/// Integrated autocorrelation time by batch means with about sqrt(n) batches.
double integrated_autocorrelation_time(std::span<const double> series);

/// Mean and standard error from non-overlapping batch means.
struct BatchEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};
BatchEstimate batch_means(std::span<const double> series, std::size_t n_batches = 50);

/// Trapezoidal time average with its running curve. Weights are normalised by
/// their own sum, so f = 1 averages to exactly 1.
struct TimeAverage {
  double value = 0.0;
  std::vector<double> running;  // running[i] = average over [t_0, t_i]; running[0] = f_0
};
TimeAverage time_average(std::span<const double> times, std::span<const double> values);

/// Streaming trapezoidal average for paths too long to store.
class RunningAverage {
 public:
  void add(double t, double f);
  double value() const;
  double span() const noexcept { return t_last_ - t_first_; }

 private:
  bool started_ = false;
  double t_first_ = 0.0;
  double t_last_ = 0.0;
  double f_last_ = 0.0;
  double weighted_ = 0.0;
  double weight_ = 0.0;
};

struct EnsembleSpec {
  enum class Init { FromMu, FromPoint };
  std::size_t n_traj = 1;
  /// FromMu: v ~ N(0, 1/m), z ~ N(0, I) and x = x0 (the x-marginal is not
  /// defined for the free particle). FromPoint: the given state.
  Init init = Init::FromMu;
  double x0 = 0.0;
  std::optional<State> point;
  std::size_t n_record = 60;  // log-spaced recording times in [dt, t_final]
  unsigned threads = 1;
};

struct MsdCurve {
  std::vector<double> times;
  std::vector<double> msd;
  std::vector<double> stderr_;
  double window_lo = 0.0;
  double window_hi = 0.0;
  bool window_clamped = false;  // default upper end cut to t_final
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points_in_window = 0;
};

/// Default fit window [10, 0.05 / lambda_N], upper end clamped to t_final.
std::pair<double, double> default_msd_window(const ModeSet& modes, double t_final, bool* clamped);

/// E[x(t)^2] over n_traj free-particle paths. Trajectory i uses streams
/// (seed, InitialModes, i) and (seed, Trajectory, i).
MsdCurve msd_ensemble(const EnsembleSpec& spec, const ModeSet& modes, const Potential& p,
                      const SimConfig& cfg, std::optional<double> window_lo = std::nullopt,
                      std::optional<double> window_hi = std::nullopt);

/// Log-log slope of an MSD curve over [lo, hi].
void fit_msd_window(MsdCurve& curve, double lo, double hi);

/// Exact MSD of the free particle with x(0) = 0 and (v, z) started from
/// N(0, diag(1/m, 1, ..)): 2 * int_0^t (t - u) C(u) du, C the velocity
/// autocorrelation, by RK4 on the linear moment equations with step h.
std::vector<double> exact_free_msd(const ModeSet& modes, double m, double gamma,
                                   std::span<const double> times, double h = 1e-3);

struct StationarityReport {
  std::size_t n_raw = 0;        // recorded samples before thinning
  double tau_x = 0.0;           // integrated autocorrelation times, in samples
  double tau_v = 0.0;
  std::size_t thin_x = 1;
  std::size_t thin_v = 1;
  MarginalTest x_test;
  MarginalTest v_test;
  BatchEstimate mean_x2;        // time averages with batch-means errors
  BatchEstimate mean_v2;
  double target_x2 = 0.0;
  double target_v2 = 0.0;
  std::vector<double> x_samples;  // after thinning
  std::vector<double> v_samples;
};

/// One long path from a mu sample, positions and velocities recorded every
/// `record_every` steps, thinned by their autocorrelation times, then tested
/// against the Gibbs x-marginal and N(0, 1/m).
StationarityReport stationarity_test(const ModeSet& modes, const Potential& p,
                                     const SimConfig& cfg, std::size_t record_every = 10);

struct MomentCheck {
  std::string name;
  double estimate = 0.0;
  double target = 0.0;
  double stderr_ = 0.0;
  double z_score = 0.0;
};

struct Checkpoint {
  double t = 0.0;
  std::vector<MomentCheck> moments;  // E x, E x^2, E v^2, E z_1^2, E z_N^2
  double ks_x = 0.0;
  double ks_v = 0.0;
  double max_abs_z = 0.0;
};

struct InvarianceReport {
  std::vector<Checkpoint> checkpoints;
  std::size_t n_traj = 0;
};

struct InvarianceOptions {
  unsigned threads = 1;
  /// Start with z = 0 instead of sampling the modes (a deliberately wrong law).
  bool zero_modes = false;
};

/// n_traj paths from exact mu samples, moments and KS statistics at each
/// checkpoint (rounded to the step grid). Sample i uses (seed, GibbsSampling, i),
/// its path (seed, Trajectory, i).
InvarianceReport invariance_propagation_test(const ModeSet& modes, const Potential& p,
                                             const SimConfig& cfg, std::size_t n_traj,
                                             std::vector<double> checkpoints,
                                             const InvarianceOptions& opts = {});

}  // namespace gle
