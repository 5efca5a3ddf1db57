#include <benchmark/benchmark.h>

#include <vector>

#include "superexp/dataio.hpp"
#include "superexp/densities.hpp"
#include "superexp/diffusion.hpp"
#include "superexp/estimation.hpp"
#include "superexp/growth_model.hpp"
#include "superexp/random.hpp"
#include "superexp/simulation.hpp"

namespace dn = superexp::densities;
namespace df = superexp::diffusion;
namespace es = superexp::estimation;
namespace gm = superexp::growth;
namespace sim = superexp::simulation;
namespace dio = superexp::dataio;

namespace {

std::vector<superexp::Observation> gwp_sample() {
  return dio::weights(dio::from_year(dio::resample_decennial(dio::load_series("gwp")), -9999));
}

// Density at increasing noncentrality, where the mixture spans more terms.
void BM_FellerDensity(benchmark::State& state) {
  const double lam = static_cast<double>(state.range(0));
  double x = 0.5 * lam;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dn::density(dn::DensityKind::Feller, x, {lam, -3.7}));
    x += 1e-9;
  }
}
BENCHMARK(BM_FellerDensity)->Arg(1)->Arg(100)->Arg(10000)->Arg(1000000);

void BM_FellerCdf(benchmark::State& state) {
  const double lam = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dn::cdf(dn::DensityKind::Feller, 0.8 * lam, {lam, -3.7}));
}
BENCHMARK(BM_FellerCdf)->Arg(1)->Arg(100)->Arg(10000);

void BM_WeightedLoglik(benchmark::State& state) {
  const auto series = gwp_sample();
  const df::PrimaryParams pp{-12.66, 1.86e-5, -23.78, -1.813};
  for (auto _ : state)
    benchmark::DoNotOptimize(es::weighted_loglik(pp, df::BoundaryKind::Absorbing, series));
}
BENCHMARK(BM_WeightedLoglik);

void BM_FitMl(benchmark::State& state) {
  const auto series = gwp_sample();
  es::FitOptions o;
  o.cev_test = false;
  for (auto _ : state) benchmark::DoNotOptimize(es::fit_ml(series, o).loglik);
}
BENCHMARK(BM_FitMl)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_EulerMaruyamaPath(benchmark::State& state) {
  const auto sp = df::primary_to_superexp({-12.66, 1.86e-5, -23.78, -1.813});
  sim::RolloutConfig cfg;
  cfg.t_max = 100.0;
  cfg.n_steps = 100000;
  cfg.value_cap = 1e12;
  std::uint64_t stream = 0;
  for (auto _ : state) {
    superexp::CounterRng rng(1, stream++);
    benchmark::DoNotOptimize(sim::euler_maruyama(73640.0, sp, cfg, rng, false).end_time);
  }
}
BENCHMARK(BM_EulerMaruyamaPath)->Unit(benchmark::kMillisecond);

void BM_ExplosionQuantile(benchmark::State& state) {
  const auto sp = df::primary_to_superexp({-12.66, 1.86e-5, -23.78, -1.813});
  for (auto _ : state) benchmark::DoNotOptimize(df::explosion_quantile(0.5, 73640.0, sp));
}
BENCHMARK(BM_ExplosionQuantile);

void BM_GrowthSimulate(benchmark::State& state) {
  const auto sc = gm::baseline();
  gm::SimulateOptions o{1e-3, 100.0, 10.0, 1e-300};
  for (auto _ : state) benchmark::DoNotOptimize(gm::simulate(sc.economy, sc.y0, o).end_time);
}
BENCHMARK(BM_GrowthSimulate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
