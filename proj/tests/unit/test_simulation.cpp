#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "superexp/dataio.hpp"
#include "superexp/diffusion.hpp"
#include "superexp/errors.hpp"
#include "superexp/estimation.hpp"
#include "superexp/random.hpp"
#include "superexp/simulation.hpp"
#include "superexp/stats.hpp"

namespace df = superexp::diffusion;
namespace es = superexp::estimation;
namespace dio = superexp::dataio;
namespace sim = superexp::simulation;
using df::BoundaryKind;
using df::PrimaryParams;
using df::SuperexpParams;
using superexp::CounterRng;
using superexp::Observation;

namespace {

const SuperexpParams kModerate{1e-3, 0.5, -2e-4, 0.02};

// A fit stand-in holding given parameters and covariance.
es::FitResult fixed_fit(const PrimaryParams& pp, BoundaryKind kind,
                        const Eigen::Matrix4d& cov = Eigen::Matrix4d::Zero()) {
  es::FitResult f{};
  f.boundary = kind;
  f.primary = pp;
  f.covariance = cov;
  f.converged = true;
  f.hessian_ok = true;
  return f;
}

std::vector<Observation> gwp_decennial() {
  return dio::weights(dio::from_year(dio::resample_decennial(dio::load_series("gwp")), -9999));
}

// Restores the thread-count variable on scope exit.
struct ThreadsEnv {
  explicit ThreadsEnv(const char* v) { setenv("SUPEREXP_THREADS", v, 1); }
  ~ThreadsEnv() { unsetenv("SUPEREXP_THREADS"); }
};

}  // namespace

TEST(EulerMaruyama, SameSeedSamePath) {
  sim::RolloutConfig cfg{0.1, 500.0, 1e5, 1, 7, 0};
  CounterRng a(7, 3), b(7, 3), c(7, 4);
  const auto p = sim::euler_maruyama(1.0, kModerate, cfg, a);
  const auto q = sim::euler_maruyama(1.0, kModerate, cfg, b);
  const auto r = sim::euler_maruyama(1.0, kModerate, cfg, c);
  EXPECT_EQ(p.t, q.t);
  EXPECT_EQ(p.y, q.y);
  EXPECT_NE(p.y, r.y);
  EXPECT_DOUBLE_EQ(p.y.front(), 1.0);
}

TEST(EulerMaruyama, NoiselessMatchesClosedForm) {
  // With sigma = 0, x = y^{-B} solves dx/dt = -B s - B delta x.
  SuperexpParams sp = kModerate;
  sp.sigma = 0.0;
  sim::RolloutConfig cfg{0.01, 5000.0, 1e5, 1, 0, 0};
  CounterRng rng(1, 0);
  const auto p = sim::euler_maruyama(1.0, sp, cfg, rng);
  ASSERT_EQ(p.cause, sim::Termination::CapHit);
  const double k = sp.s / sp.delta;
  int checked = 0;
  for (std::size_t i = 0; i < p.t.size(); ++i) {
    const double x = (1.0 + k) * std::exp(-sp.B * sp.delta * p.t[i]) - k;
    if (!(x > 0.0)) break;
    const double y = std::pow(x, -1.0 / sp.B);
    if (y > 100.0) break;
    EXPECT_NEAR(p.y[i], y, 0.005 * y) << "t = " << p.t[i];
    ++checked;
  }
  EXPECT_GT(checked, 1000);
}

TEST(EulerMaruyama, FullSeriesFitMostlyDecays) {
  // Eventual explosion probability from the initial value is about 0.022.
  const auto sp = df::primary_to_superexp({-13.45, 2.05e-5, -51.75, -1.930});
  sim::RolloutConfig cfg{1.0, 1e6, 1e5, 1, 0, 0};
  int hits = 0;
  for (int i = 0; i < 99; ++i) {
    CounterRng rng(5, static_cast<std::uint64_t>(i));
    if (sim::euler_maruyama(0.05, sp, cfg, rng, false).cause == sim::Termination::CapHit) ++hits;
  }
  EXPECT_LE(hits, 8);
}

TEST(EulerMaruyama, ClampsNonpositiveSteps) {
  const SuperexpParams sp{1e-3, 0.5, -0.05, 2.0};
  sim::RolloutConfig cfg{0.5, 200.0, 1e5, 1, 0, 0};
  int clamped = 0;
  for (int i = 0; i < 20; ++i) {
    CounterRng rng(2, static_cast<std::uint64_t>(i));
    const auto p = sim::euler_maruyama(1.0, sp, cfg, rng);
    clamped += p.clamped_steps;
    for (double y : p.y) EXPECT_GT(y, 0.0);
  }
  EXPECT_GT(clamped, 0);
}

TEST(EulerMaruyama, CapHitTimeInterpolatesInLogValue) {
  SuperexpParams sp{0.0, 0.5, 0.1, 0.0};
  sim::RolloutConfig cfg{1.0, 100.0, 2.0, 1, 0, 0};
  CounterRng rng(0, 0);
  const auto p = sim::euler_maruyama(1.0, sp, cfg, rng);
  ASSERT_EQ(p.cause, sim::Termination::CapHit);
  // Steps multiply by 1.1; the crossing of ln 2 is interpolated in ln y.
  const double n = std::floor(std::log(2.0) / std::log(1.1));
  const double frac = (std::log(2.0) - n * std::log(1.1)) / std::log(1.1);
  EXPECT_NEAR(p.end_time, n + frac, 1e-12);
  EXPECT_DOUBLE_EQ(p.y.back(), 2.0);
}

TEST(RolloutBundle, BandsOrderedAndPathsStartAtY0) {
  const auto pp = df::superexp_to_primary(kModerate);
  sim::RolloutConfig cfg{0.1, 300.0, 1e5, 400, 3, 0};
  const auto b = sim::rollout_bundle(1.0, fixed_fit(pp, BoundaryKind::Absorbing), cfg, false, 30);
  ASSERT_EQ(b.values.size(), 400u);
  ASSERT_EQ(b.grid.size(), 31u);
  for (const auto& row : b.values) EXPECT_DOUBLE_EQ(row.front(), 1.0);
  for (const auto& band : b.bands) {
    for (std::size_t l = 1; l < band.size(); ++l) EXPECT_LE(band[l - 1], band[l]);
    // The 25-75% region lies inside the 5-95% region.
    EXPECT_LE(band[0], band[4]);
    EXPECT_GE(band[18], band[14]);
  }
}

TEST(RolloutBundle, ZeroCovarianceMatchesFixedParameters) {
  const auto pp = df::superexp_to_primary(kModerate);
  sim::RolloutConfig cfg{0.1, 200.0, 1e5, 100, 9, 0};
  const auto fit = fixed_fit(pp, BoundaryKind::Absorbing);
  const auto a = sim::rollout_bundle(1.0, fit, cfg, false, 20);
  const auto b = sim::rollout_bundle(1.0, fit, cfg, true, 20);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(b.rejected_draws, 0);
}

TEST(RolloutBundle, ThreadCountDoesNotChangeResults) {
  const auto pp = df::superexp_to_primary(kModerate);
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  cov.diagonal() << 0.01, 1e-10, 0.01, 0.001;
  const auto fit = fixed_fit(pp, BoundaryKind::Absorbing, cov);
  sim::RolloutConfig cfg{0.1, 200.0, 1e5, 64, 4, 0};
  sim::RolloutBundle one, many;
  {
    ThreadsEnv env("1");
    ASSERT_EQ(sim::thread_count(), 1);
    one = sim::rollout_bundle(1.0, fit, cfg, true, 20);
  }
  {
    ThreadsEnv env("5");
    ASSERT_EQ(sim::thread_count(), 5);
    many = sim::rollout_bundle(1.0, fit, cfg, true, 20);
  }
  EXPECT_EQ(one.values, many.values);
  EXPECT_EQ(one.bands, many.bands);
}

TEST(RolloutBundle, MedianTracksAnalyticMedian) {
  const auto pp = df::superexp_to_primary(kModerate);
  sim::RolloutConfig cfg{0.01, 100.0, 1e5, 10000, 12, 0};
  const auto b = sim::rollout_bundle(1.0, fixed_fit(pp, BoundaryKind::Absorbing), cfg, false, 10);
  for (std::size_t j = 1; j < b.grid.size(); ++j) {
    // Analytic median by bisection on the transition CDF; it must lie in the 45-55% band.
    double lo = 1e-3, hi = 1e3;
    for (int it = 0; it < 100; ++it) {
      const double mid = std::sqrt(lo * hi);
      (df::transition_cdf(BoundaryKind::Absorbing, mid, 1.0, b.grid[j], kModerate) < 0.5 ? lo : hi) = mid;
    }
    EXPECT_GE(lo, b.bands[j][8]) << "t = " << b.grid[j];
    EXPECT_LE(lo, b.bands[j][10]) << "t = " << b.grid[j];
  }
}

TEST(DrawParameters, RejectionAboveHalfAborts) {
  // nu sits past the absorbing limit, so most draws leave the region.
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  cov.diagonal() << 0.01, 1e-10, 100.0, 0.001;
  const auto fit = fixed_fit({-5, 0.01, 10.0, -2.0}, BoundaryKind::Absorbing, cov);
  EXPECT_THROW(sim::draw_parameters(fit, 200, 1), superexp::SamplingError);
}

TEST(DrawParameters, DrawsAreAdmissibleAndReproducible) {
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  cov.diagonal() << 0.01, 1e-10, 4.0, 0.001;
  const auto fit = fixed_fit({-5, 0.01, -1.0, -2.0}, BoundaryKind::Absorbing, cov);
  int rejected = 0;
  const auto a = sim::draw_parameters(fit, 500, 3, &rejected);
  const auto b = sim::draw_parameters(fit, 500, 3);
  EXPECT_GT(rejected, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE(a[i].nu, 0.0);
    EXPECT_EQ(a[i].nu, b[i].nu);
  }
}

TEST(Gof, QuantilesOnlyForObservationsWithPredecessor) {
  const auto series = gwp_decennial();
  const auto fit = fixed_fit({-12.66, 1.86e-5, -23.78, -1.813}, BoundaryKind::Absorbing);
  const auto rep = sim::gof_quantiles(series, fit);
  ASSERT_EQ(rep.u.size(), series.size() - 1);
  for (double u : rep.u) {
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, 1.0);
  }
  // 1820, 1870 and 1913 ascend.
  auto at = [&](double year) {
    for (std::size_t i = 0; i < rep.times.size(); ++i)
      if (rep.times[i] == year) return rep.u[i];
    return std::numeric_limits<double>::quiet_NaN();
  };
  EXPECT_LT(at(1820), at(1870));
  EXPECT_LT(at(1870), at(1913));
}

TEST(Gof, InvariantToUnits) {
  const auto series = gwp_decennial();
  const PrimaryParams pp{-12.66, 1.86e-5, -23.78, -1.813};
  auto sp = df::primary_to_superexp(pp);
  const double k = 250.0;
  auto rescaled = series;
  for (auto& o : rescaled) o.value *= k;
  sp.s *= std::pow(k, -sp.B);
  sp.sigma *= std::pow(k, -0.5 * sp.B);
  const auto a = sim::gof_quantiles(series, fixed_fit(pp, BoundaryKind::Absorbing));
  const auto b = sim::gof_quantiles(rescaled, fixed_fit(df::superexp_to_primary(sp), BoundaryKind::Absorbing));
  for (std::size_t i = 0; i < a.u.size(); ++i) EXPECT_NEAR(a.u[i], b.u[i], 1e-8);
  EXPECT_NEAR(a.ks.p_value, b.ks.p_value, 1e-8);
}

TEST(Gof, SelfSimulatedSeriesGiveUniformPValues) {
  // Series drawn from the model itself, scored with the true parameters.
  const auto pp = df::superexp_to_primary(kModerate);
  const auto fit = fixed_fit(pp, BoundaryKind::Absorbing);
  sim::RolloutConfig cfg{0.01, 200.0, 1e12, 1, 0, 0};
  double sum = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    CounterRng rng(21, static_cast<std::uint64_t>(r));
    const auto path = sim::euler_maruyama(1.0, kModerate, cfg, rng);
    std::vector<Observation> s;
    for (std::size_t i = 0; i < path.t.size(); i += 1000) s.push_back({path.t[i], path.y[i], 0, 1});
    sum += sim::gof_quantiles(s, fit).ks.p_value;
  }
  EXPECT_NEAR(sum / reps, 0.5, 0.1);
}

TEST(Rolling, ShortSeriesProducesQuantileOrMissing) {
  CounterRng rng(8, 0);
  sim::RolloutConfig cfg{0.05, 400.0, 1e12, 1, 0, 0};
  const auto path = sim::euler_maruyama(1.0, kModerate, cfg, rng);
  std::vector<Observation> s;
  for (std::size_t i = 0; i < path.t.size(); i += 800) s.push_back({path.t[i], path.y[i], 0, 1});
  sim::RollingOptions opt;
  opt.rollout.n_paths = 200;
  opt.rollout.n_steps = 500;
  const auto pts = sim::rolling_quantiles(s, opt);
  ASSERT_EQ(pts.size(), s.size() - 5);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(pts[i].time, s[i + 5].time);
    if (!std::isnan(pts[i].u)) {
      EXPECT_GE(pts[i].u, 0.0);
      EXPECT_LE(pts[i].u, 1.0);
    }
  }
  EXPECT_THROW(sim::rolling_quantiles(s, {4}), superexp::DomainError);
}

TEST(Benchmark, ResampleKeepsRelativeSpacing) {
  sim::Path p;
  for (int i = 0; i <= 100; ++i) {
    p.t.push_back(i * 0.5);
    p.y.push_back(1.0 + i);
  }
  p.end_time = 50.0;
  const auto obs = sim::resample_path(p, {-100.0, -50.0, 0.0, 100.0});
  ASSERT_EQ(obs.size(), 4u);
  EXPECT_DOUBLE_EQ(obs[0].time, 0.0);
  EXPECT_NEAR(obs[1].time, 12.5, 1e-12);
  EXPECT_NEAR(obs[2].time, 25.0, 1e-12);
  EXPECT_NEAR(obs[3].time, 50.0, 1e-12);
  EXPECT_NEAR(obs[1].value, 26.0, 1e-9);
  EXPECT_DOUBLE_EQ(obs[3].value, 101.0);
}

TEST(Benchmark, RetainsExactlyNRisingPaths) {
  const auto sp = df::primary_to_superexp({-12.66, 1.86e-5, -23.78, -1.813});
  const auto series = gwp_decennial();
  std::vector<double> tmpl;
  for (const auto& o : series) tmpl.push_back(o.time);
  const auto a = sim::monte_carlo_benchmark(sp, tmpl, 6, 17);
  EXPECT_EQ(a.retained, 6);
  EXPECT_GE(a.generated, 6);
  EXPECT_EQ(a.nls_B.size(), 6u);
  EXPECT_EQ(a.ml_B.size(), 6u);
  EXPECT_DOUBLE_EQ(a.true_B, sp.B);
  const auto b = sim::monte_carlo_benchmark(sp, tmpl, 6, 17);
  for (std::size_t i = 0; i < 6; ++i) {
    if (std::isnan(a.ml_B[i])) EXPECT_TRUE(std::isnan(b.ml_B[i]));
    else EXPECT_EQ(a.ml_B[i], b.ml_B[i]);
  }
}
