// One PASS/FAIL line per acceptance criterion. Arguments select a subset by
// number; the exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oracles/oracles.hpp"
#include "superexp/dataio.hpp"
#include "superexp/densities.hpp"
#include "superexp/diffusion.hpp"
#include "superexp/estimation.hpp"
#include "superexp/growth_model.hpp"
#include "superexp/random.hpp"
#include "superexp/simulation.hpp"
#include "superexp/special_fns.hpp"
#include "superexp/stats.hpp"
#include "superexp_cli/commands.hpp"

namespace fs = std::filesystem;
namespace cli = superexp::cli;
namespace df = superexp::diffusion;
namespace dn = superexp::densities;
namespace dio = superexp::dataio;
namespace es = superexp::estimation;
namespace gm = superexp::growth;
namespace sim = superexp::simulation;
using df::BoundaryKind;
using df::PrimaryParams;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects named checks; a criterion passes when all of them do.
class Checks {
 public:
  void in(const std::string& name, double value, double lo, double hi) {
    const bool ok = value >= lo && value <= hi;
    add(ok, name + "=" + num(value) + " in [" + num(lo) + ", " + num(hi) + "]");
  }
  void near(const std::string& name, double value, double target, double tol) {
    const bool ok = std::abs(value - target) <= tol;
    add(ok, name + "=" + num(value) + " vs " + num(target) + " +- " + num(tol));
  }
  void below(const std::string& name, double value, double limit) {
    add(value < limit, name + "=" + num(value) + " < " + num(limit));
  }
  void truth(const std::string& name, bool ok) { add(ok, name); }
  bool passed() const { return failed_.empty(); }
  std::string summary() const {
    std::string s;
    for (const auto& f : failed_) s += (s.empty() ? "" : "; ") + std::string("FAILED ") + f;
    for (const auto& p : passed_) s += (s.empty() ? "" : "; ") + p;
    return s;
  }

 private:
  static std::string num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.6g", v);
    return b;
  }
  void add(bool ok, const std::string& text) { (ok ? passed_ : failed_).push_back(text); }
  std::vector<std::string> passed_, failed_;
};

fs::path out_dir() {
  static const fs::path p = [] {
    const fs::path d = fs::temp_directory_path() / "superexp_acceptance";
    fs::create_directories(d);
    return d;
  }();
  return p;
}

cli::Json fit_document(const std::string& dataset, int perturb = 0, std::optional<double> from = -9999.0,
                       bool decennial = true, const std::string& boundary = "auto") {
  cli::RunConfig c;
  c.command = "fit";
  c.dataset = dataset;
  c.decennial = decennial;
  c.from_year = from;
  c.perturb = perturb;
  c.boundary = boundary;
  c.out = out_dir().string();
  return cli::cmd_fit(c).document;
}

double derived(const cli::Json& doc, const char* key) {
  const auto& v = doc["fit"]["derived"][key];
  return v.is_object() && v["value"].is_number() ? v["value"].get<double>() : std::nan("");
}

double primary(const cli::Json& doc, const char* key) { return doc["fit"]["primary"][key]["value"]; }

std::vector<superexp::Observation> gwp_decennial() {
  return dio::weights(dio::from_year(dio::resample_decennial(dio::load_series("gwp")), -9999));
}

// GWP, 10,000 BCE to 2019 with decennial data after 1950.
Checks gwp_decennial_fit() {
  Checks c;
  const auto t0 = Clock::now();
  const auto d = fit_document("gwp");
  const double secs = seconds_since(t0);
  c.truth("boundary=" + d["fit"]["boundary"].get<std::string>() + " is absorbing",
          d["fit"]["boundary"] == "absorbing");
  c.in("B", derived(d, "B"), 0.53, 0.575);
  c.in("gamma", primary(d, "gamma"), -1.90, -1.73);
  c.in("nu", primary(d, "nu"), -28.0, -20.0);
  c.near("median explosion year", derived(d, "median_explosion_year_last"), 2047.0, 2.0);
  const auto& lr = d["fit"]["cev_test"];
  c.near("LR chi2(1)", lr.is_object() ? lr["statistic"].get<double>() : std::nan(""), 61.7, 1.5);
  c.in("KS p", d["gof"]["ks_p"].get<double>(), 0.3, 0.7);
  c.below("runtime s", secs, 120.0);
  return c;
}

// Population, France GDP/capita and GWP/capita on the same sample.
Checks other_series() {
  Checks c;
  const auto pop = fit_document("population");
  c.near("population B", derived(pop, "B"), 0.558, 0.03);
  c.near("population median year", derived(pop, "median_explosion_year_last"), 2175.0, 25.0);
  const auto fr = fit_document("france_gdp_per_capita");
  c.near("France B", derived(fr, "B"), 0.945, 0.08);
  const auto pc = fit_document("gwp_per_capita");
  c.near("GWP/capita B (" + pc["fit"]["boundary"].get<std::string>() + ")", derived(pc, "B"), 1.70, 0.15);
  // Diagnostic only: the absorbing fit the selection rule passed over.
  const auto pca = fit_document("gwp_per_capita", 0, -9999.0, true, "absorbing");
  std::printf("    note: GWP/capita absorbing-only B=%.4f loglik=%.4f, selected loglik=%.4f\n",
              derived(pca, "B"), pca["fit"]["loglik"].get<double>(), pc["fit"]["loglik"].get<double>());
  return c;
}

// Values scaled by e^{-h} and e^{+h}.
Checks perturbation_robustness() {
  Checks c;
  const auto lo = fit_document("gwp", -1);
  c.near("e^-h B", derived(lo, "B"), 0.492, 0.02);
  c.near("e^-h median year", derived(lo, "median_explosion_year_last"), 2050.0, 2.0);
  const auto hi = fit_document("gwp", 1);
  c.near("e^+h B", derived(hi, "B"), 0.616, 0.02);
  c.near("e^+h median year", derived(hi, "median_explosion_year_last"), 2043.0, 2.0);
  return c;
}

// ML against NLS on 1,000 retained simulated paths.
Checks estimator_benchmark() {
  Checks c;
  const auto t0 = Clock::now();
  const auto series = gwp_decennial();
  const auto fit = es::fit_ml(series);
  std::vector<double> tmpl;
  for (const auto& o : series) tmpl.push_back(o.time);
  const auto r = sim::monte_carlo_benchmark(df::primary_to_superexp(fit.primary), tmpl, 1000, 0);
  const double secs = seconds_since(t0);
  std::printf("    note: true B=%.4f generated=%d both converged=%d NLS conv=%.3f ML conv=%.3f "
              "SD NLS=%.4f ML=%.4f\n",
              r.true_B, r.generated, r.both_converged, r.nls.convergence_rate, r.ml.convergence_rate,
              r.nls.sd_B, r.ml.sd_B);
  c.in("SD ratio NLS/ML", r.sd_ratio, 2.0, 3.5);
  c.in("NLS bias", r.nls.bias, 0.010, 0.028);
  c.below("|ML bias|", std::abs(r.ml.bias), 0.005);
  c.truth("retained " + std::to_string(r.retained) + " of 1000", r.retained == 1000);
  c.below("runtime s", secs, 1800.0);
  return c;
}

// Properties of the two gamma-mixture densities, and Euler-Maruyama against
// the analytic transition law.
Checks density_properties() {
  Checks c;
  using dn::DensityKind;
  const auto chi = DensityKind::NoncentralChiSq, fel = DensityKind::Feller;

  double coincide = 0.0;
  for (double nu : {-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 5.0})
    for (double lam : {0.1, 1.0, 7.5, 60.0})
      for (double x : {0.02, 0.9, 6.0, 45.0}) {
        const double a = dn::density(chi, x, {lam, nu}), b = dn::density(fel, x, {lam, nu});
        if (a > 1e-290) coincide = std::max(coincide, std::abs(a - b) / a);
      }
  c.below("integer-nu kinds max rel diff", coincide, 1e-10);

  // Independent Bessel-form evaluation over moderate arguments.
  double bessel = 0.0;
  for (double nu : {-2.5, -1.0, -0.3, 0.0, 0.7, 3.0})
    for (double lam : {0.3, 4.0, 25.0})
      for (double x : {0.1, 2.0, 20.0}) {
        const double a = dn::density(chi, x, {lam, nu}), b = oracle::chi2_density_bessel(x, lam, nu);
        const double f = dn::density(fel, x, {lam, nu}), g = oracle::feller_density(x, lam, nu);
        bessel = std::max({bessel, std::abs(a - b) / std::abs(b), std::abs(f - g) / std::abs(g)});
      }
  c.below("max rel diff vs Bessel-form oracle", bessel, 1e-10);

  double dual = 0.0;
  for (double nu : {-4.5, -1.2, -0.3, 0.6, 3.1})
    for (double lam : {0.2, 2.0, 35.0})
      for (double x : {0.05, 1.5, 40.0}) {
        const double a = dn::density(chi, x, {lam, nu}), b = dn::density(fel, lam, {x, -nu});
        if (a > 1e-290) dual = std::max(dual, std::abs(a - b) / a);
      }
  c.below("duality max rel diff", dual, 1e-10);

  double recur = 0.0, deriv = 0.0;
  for (auto kind : {chi, fel})
    for (double nu : {-2.4, -0.7, 0.3, 1.9})
      for (double lam : {0.4, 3.0, 12.0})
        for (double x : {0.5, 2.5, 10.0}) {
          const double f = dn::density(kind, x, {lam, nu});
          const double fm = dn::density(kind, x, {lam, nu - 1}), fp = dn::density(kind, x, {lam, nu + 1});
          const double scale = std::abs(x * fm) + std::abs(lam * fp);
          recur = std::max(recur, std::abs(nu * f - (x * fm - lam * fp)) / scale);
          const double h = 1e-5;
          const double dx = (dn::density(kind, x + h, {lam, nu}) - dn::density(kind, x - h, {lam, nu})) / (2 * h);
          const double dl = (dn::density(kind, x, {lam + h, nu}) - dn::density(kind, x, {lam - h, nu})) / (2 * h);
          deriv = std::max({deriv, std::abs(dx - (fm - f)), std::abs(dl - (fp - f))});
        }
  c.below("recurrence max rel residual", recur, 1e-6);
  c.below("derivative relations max abs diff vs finite differences", deriv, 1e-6);

  double norm_err = 0.0, mom_err = 0.0;
  for (double lam : {0.5, 3.0, 9.0}) {
    for (double nu : {-2.5, -1.0, -0.4, 0.0, 0.8, 2.5}) {
      for (auto kind : {chi, fel}) {
        if (kind == chi && nu <= -1.0) continue;
        if (kind == fel && nu > 0.0) continue;
        auto f = [&](double x) { return dn::density(kind, x, {lam, nu}); };
        auto int_all = [&](const std::function<double(double)>& g) {
          return oracle::integrate_singular(g, 0.0, lam + 1.0) + oracle::integrate_to_inf(g, lam + 1.0);
        };
        norm_err = std::max(norm_err, std::abs(int_all(f) - dn::norm(kind, {lam, nu})));
        const double m1 = int_all([&](double x) { return x * f(x); });
        const double m2 = int_all([&](double x) { return x * x * f(x); });
        // Raw moments; the absorbed mass at 0 contributes nothing.
        const auto m = dn::moments(kind, {lam, nu});
        mom_err = std::max({mom_err, std::abs(m.mean - m1), std::abs(m.variance - (m2 - m1 * m1))});
      }
    }
  }
  c.below("norms max abs diff vs quadrature", norm_err, 1e-6);
  c.below("means/variances max abs diff vs quadrature", mom_err, 1e-8);

  // Terminal values of 1e5 paths scored through the analytic CDF.
  const df::SuperexpParams sp{0.05, 0.5, -0.01, 0.2};
  sim::RolloutConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 1.0;
  cfg.value_cap = 1e9;
  const int n = 100000;
  std::vector<double> u(n);
  sim::parallel_for(n, [&](int i) {
    superexp::CounterRng rng(2024, static_cast<std::uint64_t>(i));
    const auto p = sim::euler_maruyama(1.0, sp, cfg, rng, false);
    u[static_cast<std::size_t>(i)] = df::transition_cdf(BoundaryKind::Absorbing, p.y.back(), 1.0, 1.0, sp);
  });
  c.below("Euler-Maruyama KS distance (1e5 paths)", superexp::stats::ks_statistic_uniform(u), 0.01);
  return c;
}

// Explosion probability and timing against simulated hitting times, and the
// tabulated values from their rounded inputs.
Checks explosion_functionals() {
  Checks c;
  // a = 1, b = 0.5, nu = -1.5 (c = -0.5), X0 = 1.
  const PrimaryParams pp{0.0, 0.5, -1.5, -2.0};
  const auto sp = df::primary_to_superexp(pp);
  const int n = 100000;
  const auto times = oracle::feller_hitting_times(1.0, 0.5, -0.5, 1.0, 1e-3, 40.0, 400.0, n, 77);
  const double p = df::explosion_probability(1.0, sp).explode;
  int hit = 0;
  for (double t : times) hit += std::isfinite(t);
  const double p_mc = static_cast<double>(hit) / n;
  c.near("P[explosion] MC (3 SE)", p_mc, p, 3.0 * std::sqrt(p * (1 - p) / n));
  // The median gates; earlier quantiles are reported since the simulated
  // hitting times carry a step-size bias that is largest at short times.
  for (double q : {0.1, 0.25, 0.5}) {
    if (q >= p) continue;
    const double tq = df::explosion_quantile(q, 1.0, sp);
    int by = 0;
    for (double t : times) by += t <= tq;
    const double frac = static_cast<double>(by) / n, se = std::sqrt(q * (1 - q) / n);
    if (q == 0.5)
      c.near("P[explosion by median time] MC (3 SE)", frac, q, 3.0 * se);
    else
      std::printf("    note: P[explosion by q%02d time] MC=%.5f (%+.2f SE)\n", static_cast<int>(q * 100), frac,
                  (frac - q) / se);
  }

  // Tabulated inputs and their three-figure outputs.
  const auto gwp_10k = df::primary_to_superexp({-12.66, 1.86e-5, -23.78, -1.813});
  const auto gwp_full = df::primary_to_superexp({-13.45, 2.05e-5, -51.75, -1.930});
  auto three_figures = [](double v) {
    if (v == 0.0) return 0.0;
    const double e = std::floor(std::log10(std::abs(v)));
    return std::round(v / std::pow(10.0, e - 2)) * std::pow(10.0, e - 2);
  };
  auto same3 = [&](const std::string& name, double v, double target) {
    char b[96];
    std::snprintf(b, sizeof b, "%s=%.4g (3 s.f. %.3g) vs %.3g", name.c_str(), v, three_figures(v), target);
    c.truth(b, std::abs(three_figures(v) - target) <= 1e-9 * std::abs(target));
  };
  same3("P[no explosion | 2019 GWP]", df::explosion_probability(73640.0, gwp_10k).survive, 8.36e-70);
  same3("P[no explosion | 10,000 BCE GWP]", df::explosion_probability(1.6, gwp_10k).survive, 1.63e-10);
  same3("P[no explosion | 1 million BCE GWP]", df::explosion_probability(0.05, gwp_full).survive, 0.978);
  return c;
}

// Four-factor Cobb-Douglas economy.
Checks growth_suite() {
  Checks c;
  auto sc = gm::baseline();
  const auto& ep = sc.economy;
  gm::SimulateOptions o{1e-3, 5000.0, 5000.0, 1e-300};
  const std::vector<int> shared{0, 1, 3};
  auto outcome = [&](double v) {
    auto y0 = sc.y0;
    for (int i : shared) y0(i) = v;
    return gm::simulate(ep, y0, o);
  };
  const auto up = outcome(0.03117), down = outcome(0.03107);
  c.truth(std::string("0.03117 ") + gm::to_string(up.outcome) + " at year " + std::to_string(up.end_time),
          up.outcome == gm::Outcome::Explosion);
  c.truth(std::string("0.03107 ") + gm::to_string(down.outcome), down.outcome != gm::Outcome::Explosion);
  try {
    const auto b = gm::bifurcation_threshold(sc, shared, 0.030, 0.033, o, 20);
    c.in("threshold", 0.5 * (b.decays_at + b.explodes_at), 0.03107, 0.03117);
  } catch (const std::exception& e) {
    c.truth(std::string("bisection: ") + e.what(), false);
  }

  const auto cf = gm::eigen_closed_form(ep);
  const auto ev = Eigen::EigenSolver<Eigen::MatrixXd>(gm::build_B(ep), false).eigenvalues();
  double hi = -1e300, lo = 1e300;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    hi = std::max(hi, ev(i).real());
    lo = std::min(lo, ev(i).real());
  }
  c.below("|lambda+ closed - numeric|", std::abs(cf.lambda_plus - hi), 1e-8);
  c.below("|lambda- closed - numeric|", std::abs(cf.lambda_minus - lo), 1e-8);
  c.near("instability condition", gm::stability_at_stasis(ep).instability_condition, 0.85, 1e-12);

  const auto rs = gm::with_factor(sc, "R", 0.1, -0.01, 0.001, 1.0);
  gm::SimulateOptions ro{1e-3, 5000.0, 1.0, 1e-300};
  const auto tr = gm::simulate(rs.economy, rs.y0, ro);
  const auto peak = std::max_element(tr.output.begin(), tr.output.end());
  c.truth("resource run peaks at year " + std::to_string(tr.t[static_cast<std::size_t>(peak - tr.output.begin())]) +
              " before its end",
          peak != tr.output.begin() && peak + 1 != tr.output.end());
  c.below("resource run final/peak output", tr.output.back() / *peak, 0.01);
  return c;
}

// GWP from 1 million BCE with annual data after 1950.
Checks full_series_fit() {
  Checks c;
  const auto d = fit_document("gwp", 0, std::nullopt, false);
  c.near("B", derived(d, "B"), 0.518, 0.02);
  c.near("P[no eventual explosion | initial]", derived(d, "p_no_explosion_first"), 0.978, 0.01);
  c.near("median explosion year", derived(d, "median_explosion_year_last"), 2060.0, 3.0);
  return c;
}

struct Criterion {
  int id;
  const char* title;
  Checks (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "GWP decennial fit", gwp_decennial_fit},
      {2, "population and per-capita fits", other_series},
      {3, "robustness to uncertainty-scaled perturbation", perturbation_robustness},
      {4, "ML vs NLS Monte Carlo", estimator_benchmark},
      {5, "density property suite", density_properties},
      {6, "explosion functionals", explosion_functionals},
      {7, "growth-model suite", growth_suite},
      {8, "full-series fit", full_series_fit},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& cr : all) {
    if (!selected.empty() && !selected.count(cr.id)) continue;
    const auto t0 = Clock::now();
    Checks r;
    try {
      r = cr.run();
    } catch (const std::exception& e) {
      r.truth(std::string("threw: ") + e.what(), false);
    }
    std::printf("CRITERION %d %s: %s (%.1f s) %s\n", cr.id, r.passed() ? "PASS" : "FAIL", cr.title,
                seconds_since(t0), r.summary().c_str());
    std::fflush(stdout);
    failures += !r.passed();
  }
  return failures == 0 ? 0 : 1;
}
