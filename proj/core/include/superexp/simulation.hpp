#pragma once

#include <cstdint>
#include <vector>

#include "superexp/diffusion.hpp"
#include "superexp/estimation.hpp"
#include "superexp/observation.hpp"
#include "superexp/random.hpp"
#include "superexp/stats.hpp"

namespace superexp::simulation {

using diffusion::BoundaryKind;
using diffusion::PrimaryParams;
using diffusion::SuperexpParams;

struct RolloutConfig {
  double dt = 0.1;
  double t_max = 25000.0;
  double value_cap = 1e5;
  int n_paths = 10000;
  std::uint64_t seed = 0;
  /// When positive, overrides dt with t_max / n_steps.
  int n_steps = 0;
  double step() const { return n_steps > 0 ? t_max / n_steps : dt; }
};

enum class Termination { CapHit, Horizon, Decayed };
const char* to_string(Termination cause);

struct Path {
  /// Step times and values, starting at (0, y0). A cap hit ends with the
  /// interpolated crossing time and the cap value.
  std::vector<double> t;
  std::vector<double> y;
  /// CapHit, or at the horizon Horizon when the path ends at or above its
  /// start and Decayed otherwise.
  Termination cause = Termination::Horizon;
  double end_time = 0.0;
  /// Number of steps whose outcome was nonpositive and was clamped to a floor.
  int clamped_steps = 0;
};

/// Euler-Maruyama for dY = (s Y^{1+B} + delta Y) dt + sigma sqrt(Y Y^{1+B}) dW.
/// Nonpositive outcomes are clamped to 1e-12 times the steady state (or the
/// initial value when no steady state exists). A cap crossing is timed by
/// interpolating linearly in ln Y between the last two steps.
Path euler_maruyama(double y0, const SuperexpParams& sp, const RolloutConfig& cfg, CounterRng& rng,
                    bool keep_path = true);

/// Number of worker threads: SUPEREXP_THREADS when set, else the hardware count.
int thread_count();

/// Runs fn(i) for i in [0, n) across thread_count() workers. fn must write
/// only to slot i of its outputs.
template <class Fn>
void parallel_for(int n, Fn&& fn);

/// Quantile levels 0.05, 0.10, ..., 0.95.
const std::vector<double>& band_levels();

struct RolloutBundle {
  std::vector<double> grid;
  /// values[path][grid point]; +infinity after a cap hit.
  std::vector<std::vector<double>> values;
  std::vector<Termination> causes;
  std::vector<double> end_times;
  /// bands[grid point][level] over band_levels().
  std::vector<std::vector<double>> bands;
  int rejected_draws = 0;
  int clamped_paths = 0;
};

/// Parameters for every path: the fit itself, or multivariate-normal draws
/// around it with the fit covariance, rejecting draws outside the region
/// admissible for the fitted boundary. Path i uses RNG stream i.
/// Throws SamplingError when more than half of all draws are rejected.
std::vector<PrimaryParams> draw_parameters(const estimation::FitResult& fit, int n,
                                           std::uint64_t seed, int* rejected = nullptr);

/// n_paths rollouts of length cfg.t_max from y0, recorded on a grid of
/// `grid_points` + 1 equally spaced times from 0 to cfg.t_max.
RolloutBundle rollout_bundle(double y0, const estimation::FitResult& fit, const RolloutConfig& cfg,
                             bool with_param_uncertainty, int grid_points = 200);

struct GofReport {
  std::vector<double> times;
  /// Conditional CDF value of each observation with a predecessor.
  std::vector<double> u;
  stats::TestResult ks;
  stats::TestResult serial;
};

GofReport gof_quantiles(const std::vector<Observation>& series, const estimation::FitResult& fit,
                        std::uint64_t seed = 0);

struct RollingOptions {
  int min_observations = 5;
  RolloutConfig rollout{0.1, 0.0, 1e5, 10000, 0, 10000};
  bool with_param_uncertainty = true;
  estimation::FitOptions fit{estimation::BoundaryChoice::Absorbing, true, 4, false, true, {}};
};

struct RollingPoint {
  double time;
  /// NaN when the fit to earlier observations failed.
  double u;
  bool fit_converged;
  double B;
};

/// Quantile of each observation among rollouts simulated from its predecessor
/// under an absorbing fit to strictly earlier observations.
std::vector<RollingPoint> rolling_quantiles(const std::vector<Observation>& series,
                                            const RollingOptions& options = {});

struct BenchmarkOptions {
  double y0 = 1.6;
  RolloutConfig rollout{0.1, 25000.0, 1e5, 0, 0, 0};
  estimation::FitOptions ml{estimation::BoundaryChoice::Absorbing, false, 4, false, false, {}};
};

struct EstimatorSummary {
  int converged = 0;
  double convergence_rate = 0.0;
  /// Over paths where both estimators converged.
  double mean_B = 0.0;
  double sd_B = 0.0;
  double bias = 0.0;
  /// Two-sided p-value of zero bias.
  double bias_p = 0.0;
};

struct BenchmarkResult {
  int generated = 0;
  int retained = 0;
  int both_converged = 0;
  double true_B = 0.0;
  EstimatorSummary nls;
  EstimatorSummary ml;
  double sd_ratio = 0.0;
  std::vector<double> nls_B, ml_B;
  std::vector<bool> nls_converged, ml_converged;
};

/// Resamples a path at the template's relative spacing, stretched to the
/// path's own end time, with unit weights.
std::vector<Observation> resample_path(const Path& path, const std::vector<double>& template_times);

/// Generates paths from the true parameters, keeps the first n that end above
/// their start, and fits NLS and absorbing ML to each.
BenchmarkResult monte_carlo_benchmark(const SuperexpParams& truth,
                                      const std::vector<double>& template_times, int n,
                                      std::uint64_t seed, const BenchmarkOptions& options = {});

}  // namespace superexp::simulation

#include "superexp/internal/parallel.hpp"
