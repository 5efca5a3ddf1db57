#include "superexp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "superexp/errors.hpp"

namespace superexp::simulation {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxDrawsPerPath = 1000;

double floor_level(double y0, const SuperexpParams& sp) {
  if (sp.B != 0.0 && sp.s != 0.0 && -sp.delta / sp.s > 0.0) {
    const double ss = diffusion::steady_state(sp);
    if (std::isfinite(ss) && ss > 0.0) return 1e-12 * ss;
  }
  return 1e-12 * y0;
}

// Value of the path at time t: log-linear between steps, +infinity past a cap hit.
double value_at(const Path& p, double t, std::size_t& cursor) {
  if (t > p.end_time) return p.cause == Termination::CapHit ? kInf : p.y.back();
  while (cursor + 1 < p.t.size() && p.t[cursor + 1] < t) ++cursor;
  if (cursor + 1 >= p.t.size()) return p.y.back();
  const double t0 = p.t[cursor], t1 = p.t[cursor + 1];
  if (t <= t0) return p.y[cursor];
  const double w = (t - t0) / (t1 - t0);
  return std::exp((1.0 - w) * std::log(p.y[cursor]) + w * std::log(p.y[cursor + 1]));
}

stats::Summary summarize(const std::vector<double>& v) {
  if (v.size() < 2) return {v.empty() ? kNaN : v.front(), kNaN};
  return stats::mean_sd(v);
}

}  // namespace

const char* to_string(Termination cause) {
  switch (cause) {
    case Termination::CapHit: return "cap-hit";
    case Termination::Decayed: return "decayed";
    default: return "horizon";
  }
}

int thread_count() {
  if (const char* env = std::getenv("SUPEREXP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(std::min<long>(v, 1024));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

const std::vector<double>& band_levels() {
  static const std::vector<double> levels = [] {
    std::vector<double> v;
    for (int i = 1; i <= 19; ++i) v.push_back(0.05 * i);
    return v;
  }();
  return levels;
}

Path euler_maruyama(double y0, const SuperexpParams& sp, const RolloutConfig& cfg, CounterRng& rng,
                    bool keep_path) {
  if (!(y0 > 0.0)) throw DomainError("euler_maruyama: y0 must be positive");
  if (!(cfg.t_max > 0.0) || !(cfg.step() > 0.0) || !(cfg.value_cap > 0.0))
    throw DomainError("euler_maruyama: t_max, dt and value_cap must be positive");
  const double dt = cfg.step();
  const double sqrt_dt = std::sqrt(dt);
  const double floor = floor_level(y0, sp);
  const long steps = cfg.n_steps > 0 ? cfg.n_steps : static_cast<long>(std::ceil(cfg.t_max / dt - 1e-9));

  Path p;
  if (keep_path) {
    p.t.reserve(static_cast<std::size_t>(std::min<long>(steps + 2, 1L << 20)));
    p.y.reserve(p.t.capacity());
  }
  p.t.push_back(0.0);
  p.y.push_back(y0);
  double y = y0;
  double t = 0.0;
  for (long i = 1; i <= steps; ++i) {
    const double h = std::min(dt, cfg.t_max - t);
    const double yB = std::exp(sp.B * std::log(y));
    const double drift = (sp.s * yB + sp.delta) * y;
    const double vol = sp.sigma * y * std::sqrt(yB);
    double next = y + drift * h + vol * (h == dt ? sqrt_dt : std::sqrt(h)) * rng.normal();
    const double t_next = i == steps ? cfg.t_max : t + h;
    if (!(next < cfg.value_cap)) {
      double frac = 1.0;
      if (std::isfinite(next)) frac = (std::log(cfg.value_cap) - std::log(y)) / (std::log(next) - std::log(y));
      frac = std::clamp(frac, 0.0, 1.0);
      t += frac * (t_next - t);
      p.t.push_back(t);
      p.y.push_back(cfg.value_cap);
      p.cause = Termination::CapHit;
      p.end_time = t;
      return p;
    }
    if (!(next > 0.0)) {
      next = floor;
      ++p.clamped_steps;
    }
    y = next;
    t = t_next;
    if (keep_path) {
      p.t.push_back(t);
      p.y.push_back(y);
    }
  }
  if (!keep_path) {
    p.t.push_back(t);
    p.y.push_back(y);
  }
  p.end_time = t;
  p.cause = y >= y0 ? Termination::Horizon : Termination::Decayed;
  return p;
}

std::vector<PrimaryParams> draw_parameters(const estimation::FitResult& fit, int n,
                                           std::uint64_t seed, int* rejected) {
  const Eigen::Matrix4d& cov = fit.covariance;
  if (!cov.allFinite()) throw SamplingError("parameter uncertainty requires a finite covariance");
  // Symmetric square root tolerates a semidefinite covariance.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(0.5 * (cov + cov.transpose()));
  const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  const Eigen::Matrix4d root = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
  const Eigen::Vector4d mean(fit.primary.ln_a, fit.primary.b, fit.primary.nu, fit.primary.gamma);

  std::vector<PrimaryParams> out(static_cast<std::size_t>(n));
  std::vector<int> rejections(static_cast<std::size_t>(n), 0);
  parallel_for(n, [&](int i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    for (int attempt = 0; attempt < kMaxDrawsPerPath; ++attempt) {
      Eigen::Vector4d z;
      for (int j = 0; j < 4; ++j) z(j) = rng.normal();
      const Eigen::Vector4d x = mean + root * z;
      const PrimaryParams pp{x(0), x(1), x(2), x(3)};
      if (pp.gamma != 0.0 && diffusion::admissible(fit.boundary, pp.nu)) {
        out[static_cast<std::size_t>(i)] = pp;
        return;
      }
      ++rejections[static_cast<std::size_t>(i)];
    }
    throw SamplingError("parameter draws rejected " + std::to_string(kMaxDrawsPerPath) +
                        " times in a row for path " + std::to_string(i));
  });
  long total_rejected = 0;
  for (int r : rejections) total_rejected += r;
  const long total = total_rejected + n;
  if (rejected) *rejected = static_cast<int>(total_rejected);
  if (2 * total_rejected > total)
    throw SamplingError("parameter draws rejected at rate " +
                        std::to_string(static_cast<double>(total_rejected) / static_cast<double>(total)) +
                        " (" + std::to_string(total_rejected) + " of " + std::to_string(total) +
                        "), above the 50% limit");
  return out;
}

RolloutBundle rollout_bundle(double y0, const estimation::FitResult& fit, const RolloutConfig& cfg,
                             bool with_param_uncertainty, int grid_points) {
  if (cfg.n_paths < 1) throw DomainError("rollout_bundle: need at least one path");
  if (grid_points < 1) throw DomainError("rollout_bundle: need at least one grid interval");
  RolloutBundle b;
  for (int j = 0; j <= grid_points; ++j) b.grid.push_back(cfg.t_max * j / grid_points);

  const int n = cfg.n_paths;
  std::vector<PrimaryParams> params;
  // Parameter draws use a seed distinct from the path noise.
  if (with_param_uncertainty)
    params = draw_parameters(fit, n, cfg.seed ^ 0x9e3779b97f4a7c15ULL, &b.rejected_draws);

  b.values.assign(static_cast<std::size_t>(n), {});
  b.causes.assign(static_cast<std::size_t>(n), Termination::Horizon);
  b.end_times.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<int> clamped(static_cast<std::size_t>(n), 0);
  const SuperexpParams fitted = diffusion::primary_to_superexp(fit.primary);
  parallel_for(n, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    const SuperexpParams sp = with_param_uncertainty ? diffusion::primary_to_superexp(params[k]) : fitted;
    CounterRng rng(cfg.seed, static_cast<std::uint64_t>(i));
    const Path p = euler_maruyama(y0, sp, cfg, rng);
    std::vector<double> row(b.grid.size());
    std::size_t cursor = 0;
    for (std::size_t j = 0; j < b.grid.size(); ++j) row[j] = value_at(p, b.grid[j], cursor);
    b.values[k] = std::move(row);
    b.causes[k] = p.cause;
    b.end_times[k] = p.end_time;
    clamped[k] = p.clamped_steps > 0 ? 1 : 0;
  });
  for (int c : clamped) b.clamped_paths += c;

  const auto& levels = band_levels();
  b.bands.assign(b.grid.size(), std::vector<double>(levels.size()));
  std::vector<double> column(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < b.grid.size(); ++j) {
    for (std::size_t i = 0; i < column.size(); ++i) column[i] = b.values[i][j];
    std::sort(column.begin(), column.end());
    for (std::size_t l = 0; l < levels.size(); ++l) b.bands[j][l] = stats::quantile_sorted(column, levels[l]);
  }
  return b;
}

GofReport gof_quantiles(const std::vector<Observation>& series, const estimation::FitResult& fit,
                        std::uint64_t seed) {
  if (series.size() < 2) throw DomainError("gof_quantiles: need at least two observations");
  const SuperexpParams sp = diffusion::primary_to_superexp(fit.primary);
  GofReport rep;
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double dt = series[i].time - series[i - 1].time;
    rep.times.push_back(series[i].time);
    rep.u.push_back(diffusion::transition_cdf(fit.boundary, series[i].value, series[i - 1].value, dt, sp));
  }
  rep.ks = stats::ks_test_uniform(rep.u);
  rep.serial = stats::serial_correlation_test(rep.u, 5000, seed);
  return rep;
}

std::vector<RollingPoint> rolling_quantiles(const std::vector<Observation>& series,
                                            const RollingOptions& options) {
  if (options.min_observations < 5) throw DomainError("rolling_quantiles: need at least five observations per fit");
  std::vector<RollingPoint> out;
  for (std::size_t i = static_cast<std::size_t>(options.min_observations); i < series.size(); ++i) {
    RollingPoint pt{series[i].time, kNaN, false, kNaN};
    const std::vector<Observation> prefix(series.begin(), series.begin() + static_cast<long>(i));
    try {
      const estimation::FitResult fit = estimation::fit_ml(prefix, options.fit);
      pt.fit_converged = fit.converged;
      pt.B = -1.0 / fit.primary.gamma;
      if (fit.converged && (!options.with_param_uncertainty || fit.hessian_ok)) {
        RolloutConfig cfg = options.rollout;
        cfg.t_max = series[i].time - series[i - 1].time;
        cfg.seed = options.rollout.seed + i;
        const RolloutBundle b = rollout_bundle(series[i - 1].value, fit, cfg,
                                               options.with_param_uncertainty, 1);
        std::size_t below = 0;
        for (const auto& row : b.values)
          if (row.back() <= series[i].value) ++below;
        pt.u = static_cast<double>(below) / static_cast<double>(b.values.size());
      }
    } catch (const std::exception&) {
      // A failed fit or sampler leaves the quantile missing.
    }
    out.push_back(pt);
  }
  return out;
}

std::vector<Observation> resample_path(const Path& path, const std::vector<double>& template_times) {
  if (template_times.size() < 2) throw DomainError("resample_path: template needs two times");
  const double t0 = template_times.front();
  const double span = template_times.back() - t0;
  if (!(span > 0.0)) throw DomainError("resample_path: template times must increase");
  std::vector<Observation> out;
  out.reserve(template_times.size());
  std::size_t cursor = 0;
  for (std::size_t j = 0; j < template_times.size(); ++j) {
    const double t = j + 1 == template_times.size() ? path.end_time
                                                    : (template_times[j] - t0) / span * path.end_time;
    const double v = j + 1 == template_times.size() ? path.y.back() : value_at(path, t, cursor);
    out.push_back({t, v, 0.0, 1.0});
  }
  return out;
}

BenchmarkResult monte_carlo_benchmark(const SuperexpParams& truth,
                                      const std::vector<double>& template_times, int n,
                                      std::uint64_t seed, const BenchmarkOptions& options) {
  if (n < 1) throw DomainError("monte_carlo_benchmark: n must be positive");
  BenchmarkResult res;
  res.true_B = truth.B;
  std::vector<std::vector<Observation>> samples;
  // Paths are generated in batches and retained in index order so the kept
  // set does not depend on the schedule.
  int next_index = 0;
  while (static_cast<int>(samples.size()) < n) {
    const int batch = std::max(64, 2 * (n - static_cast<int>(samples.size())));
    std::vector<std::vector<Observation>> got(static_cast<std::size_t>(batch));
    std::vector<char> keep(static_cast<std::size_t>(batch), 0);
    parallel_for(batch, [&](int i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(next_index + i));
      const Path p = euler_maruyama(options.y0, truth, options.rollout, rng);
      if (p.y.back() > p.y.front()) {
        keep[static_cast<std::size_t>(i)] = 1;
        got[static_cast<std::size_t>(i)] = resample_path(p, template_times);
      }
    });
    for (int i = 0; i < batch && static_cast<int>(samples.size()) < n; ++i) {
      ++res.generated;
      if (keep[static_cast<std::size_t>(i)]) samples.push_back(std::move(got[static_cast<std::size_t>(i)]));
    }
    next_index += batch;
    if (next_index > 1000 * n + 100000)
      throw ConvergenceError("monte_carlo_benchmark: too few paths end above their start");
  }
  res.retained = n;

  res.nls_B.assign(static_cast<std::size_t>(n), kNaN);
  res.ml_B.assign(static_cast<std::size_t>(n), kNaN);
  std::vector<char> nls_ok(static_cast<std::size_t>(n), 0), ml_ok(static_cast<std::size_t>(n), 0);
  parallel_for(n, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      const estimation::NlsResult nls = estimation::fit_nls(samples[k]);
      res.nls_B[k] = nls.B;
      nls_ok[k] = nls.converged ? 1 : 0;
    } catch (const std::exception&) {
    }
    try {
      const estimation::FitResult fit = estimation::fit_kind(samples[k], BoundaryKind::Absorbing, options.ml);
      res.ml_B[k] = -1.0 / fit.primary.gamma;
      ml_ok[k] = fit.converged ? 1 : 0;
    } catch (const std::exception&) {
    }
  });
  res.nls_converged.assign(nls_ok.begin(), nls_ok.end());
  res.ml_converged.assign(ml_ok.begin(), ml_ok.end());

  std::vector<double> nb, mb;
  for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
    res.nls.converged += nls_ok[k];
    res.ml.converged += ml_ok[k];
    if (nls_ok[k] && ml_ok[k]) {
      nb.push_back(res.nls_B[k]);
      mb.push_back(res.ml_B[k]);
    }
  }
  res.both_converged = static_cast<int>(nb.size());
  const auto fill = [&](EstimatorSummary& e, const std::vector<double>& v) {
    e.convergence_rate = static_cast<double>(e.converged) / n;
    const stats::Summary s = summarize(v);
    e.mean_B = s.mean;
    e.sd_B = s.sd;
    e.bias = s.mean - truth.B;
    const double se = s.sd / std::sqrt(static_cast<double>(v.size()));
    e.bias_p = se > 0.0 ? std::erfc(std::fabs(e.bias / se) / std::sqrt(2.0)) : kNaN;
  };
  fill(res.nls, nb);
  fill(res.ml, mb);
  res.sd_ratio = res.nls.sd_B / res.ml.sd_B;
  return res;
}

}  // namespace superexp::simulation
