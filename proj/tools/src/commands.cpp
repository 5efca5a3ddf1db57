#include "superexp_cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "superexp/dataio.hpp"
#include "superexp/diffusion.hpp"
#include "superexp/errors.hpp"
#include "superexp/estimation.hpp"
#include "superexp/growth_model.hpp"
#include "superexp/simulation.hpp"
#include "superexp/stats.hpp"
#include "superexp/version.hpp"

namespace superexp::cli {

namespace {

namespace fs = std::filesystem;
using estimation::FitResult;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Dataset {
  dataio::SeriesTable table;
  std::vector<Observation> series;
  std::string checksum;
};

Dataset load_dataset(const RunConfig& c) {
  Dataset d;
  d.checksum = dataio::checksum(dataio::load_source_text(c.dataset));
  d.table = dataio::load_series(c.dataset);
  if (c.from_year) d.table = dataio::from_year(d.table, *c.from_year);
  if (c.decennial) d.table = dataio::resample_decennial(d.table);
  if (c.perturb != 0) d.table = dataio::perturb(d.table, c.perturb);
  d.series = dataio::weights(d.table);
  if (d.series.size() < 5) throw InputError("dataset has fewer than five observations after filtering");
  return d;
}

estimation::BoundaryChoice boundary_choice(const std::string& s) {
  if (s == "auto") return estimation::BoundaryChoice::Auto;
  if (s == "absorbing") return estimation::BoundaryChoice::Absorbing;
  if (s == "reflecting") return estimation::BoundaryChoice::Reflecting;
  throw InputError("unknown boundary '" + s + "' (expected auto, absorbing or reflecting)");
}

// Numbers that JSON cannot hold (infinite quantiles) are written as strings.
Json number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

Json estimate(const estimation::Estimate& e) { return {{"value", number(e.value)}, {"se", number(e.se)}}; }

Json optional_estimate(const std::optional<estimation::Estimate>& e) {
  return e ? estimate(*e) : Json(nullptr);
}

Json base_document(const RunConfig& c) {
  Json doc;
  doc["tool"] = "superexp";
  doc["version"] = kVersion;
  doc["command"] = c.command;
  doc["config"] = config_echo(c);
  return doc;
}

Json dataset_json(const Dataset& d, const RunConfig& c) {
  return {{"name", c.dataset},
          {"unit", d.table.unit},
          {"checksum", d.checksum},
          {"rows", d.series.size()},
          {"first_year", d.series.front().time},
          {"last_year", d.series.back().time}};
}

Json fit_json(const FitResult& f) {
  const auto& d = f.derived;
  Json j;
  j["boundary"] = diffusion::to_string(f.boundary);
  j["observations"] = f.observations;
  j["loglik"] = number(f.loglik);
  j["other_boundary_loglik"] = f.other_loglik ? number(*f.other_loglik) : Json(nullptr);
  j["converged"] = f.converged;
  j["hessian_ok"] = f.hessian_ok;
  j["covariance_projected"] = f.covariance_projected;
  j["nonunique_solution_regime"] = f.nonunique_solution_regime;
  j["primary"] = {{"ln_a", {{"value", number(f.primary.ln_a)}, {"se", number(f.se[0])}}},
                  {"b", {{"value", number(f.primary.b)}, {"se", number(f.se[1])}}},
                  {"nu", {{"value", number(f.primary.nu)}, {"se", number(f.se[2])}}},
                  {"gamma", {{"value", number(f.primary.gamma)}, {"se", number(f.se[3])}}}};
  j["derived"] = {{"s", estimate(d.s)},
                  {"B", estimate(d.B)},
                  {"delta", estimate(d.delta)},
                  {"sigma", estimate(d.sigma)},
                  {"phi_A", estimate(d.phi_A)},
                  {"steady_state", optional_estimate(d.steady_state)},
                  {"p_no_explosion_first", optional_estimate(d.p_no_explosion_first)},
                  {"p_no_explosion_last", optional_estimate(d.p_no_explosion_last)},
                  {"median_explosion_year_first", optional_estimate(d.median_explosion_year_first)},
                  {"median_explosion_year_last", optional_estimate(d.median_explosion_year_last)}};
  if (f.lr) {
    j["cev_test"] = {{"statistic", number(f.lr->statistic)},
                     {"p_value", number(f.lr->p_value)},
                     {"restricted_loglik", number(f.lr->restricted_loglik)},
                     {"restricted_boundary", diffusion::to_string(f.lr->restricted_boundary)},
                     {"converged", f.lr->converged}};
  } else {
    j["cev_test"] = nullptr;
  }
  Json cov = Json::array();
  for (int r = 0; r < 4; ++r) {
    Json row = Json::array();
    for (int c = 0; c < 4; ++c) row.push_back(number(f.covariance(r, c)));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  return j;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

fs::path output_path(const RunConfig& c, const std::string& file) {
  fs::create_directories(c.out);
  return fs::path(c.out) / file;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

int exit_code_for(const FitResult& f) { return f.converged ? kExitOk : kExitNotConverged; }

FitResult run_fit(const Dataset& d, const RunConfig& c, bool cev_test) {
  estimation::FitOptions opts;
  opts.boundary = boundary_choice(c.boundary);
  opts.cev_test = cev_test;
  return estimation::fit_ml(d.series, opts);
}

Json gof_json(const simulation::GofReport& g) {
  return {{"ks_statistic", number(g.ks.statistic)},
          {"ks_p", number(g.ks.p_value)},
          {"serial_statistic", number(g.serial.statistic)},
          {"serial_p", number(g.serial.p_value)}};
}

simulation::RolloutConfig rollout_config(const RunConfig& c, double t_max, int default_steps) {
  simulation::RolloutConfig rc;
  rc.t_max = t_max;
  rc.n_paths = c.paths.value_or(10000);
  rc.seed = c.seed;
  rc.value_cap = c.value_cap.value_or(1e12);
  if (!(rc.value_cap > 0.0)) throw InputError("--value-cap must be positive");
  if (c.dt) {
    rc.dt = *c.dt;
    rc.n_steps = 0;
  } else {
    rc.n_steps = c.steps.value_or(default_steps);
  }
  if (rc.n_paths < 1) throw InputError("--paths must be positive");
  if (!(rc.step() > 0.0)) throw InputError("time step must be positive");
  return rc;
}

growth::Scenario load_growth_scenario(const RunConfig& c) {
  growth::Scenario sc = growth::load_scenario(c.scenario);
  if (c.shared_start) {
    if (!(*c.shared_start > 0.0)) throw InputError("--shared-start must be positive");
    const double first = sc.y0(0);
    for (Eigen::Index i = 0; i < sc.y0.size(); ++i)
      if (sc.y0(i) == first) sc.y0(i) = *c.shared_start;
  }
  if (c.resource) sc = growth::with_factor(sc, "R", 0.1, -0.01, 0.001, 1.0);
  return sc;
}

Json complex_list(const Eigen::VectorXcd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v(i).real(), v(i).imag()});
  return out;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

}  // namespace

Json config_echo(const RunConfig& c) {
  Json j;
  j["dataset"] = c.dataset;
  j["decennial"] = c.decennial;
  j["from_year"] = c.from_year ? Json(*c.from_year) : Json(nullptr);
  j["boundary"] = c.boundary;
  j["perturb"] = c.perturb;
  j["paths"] = c.paths ? Json(*c.paths) : Json(nullptr);
  j["dt"] = c.dt ? Json(*c.dt) : Json(nullptr);
  j["steps"] = c.steps ? Json(*c.steps) : Json(nullptr);
  j["value_cap"] = c.value_cap ? Json(*c.value_cap) : Json(nullptr);
  j["seed"] = c.seed;
  j["param_uncertainty"] = c.param_uncertainty;
  j["horizon"] = c.horizon;
  j["min_observations"] = c.min_observations;
  j["scenario"] = c.scenario;
  j["resource"] = c.resource;
  j["shared_start"] = c.shared_start ? Json(*c.shared_start) : Json(nullptr);
  j["t_max"] = c.t_max ? Json(*c.t_max) : Json(nullptr);
  j["record_interval"] = c.record_interval;
  j["bisect"] = c.bisect;
  j["bracket"] = c.bracket_lo && c.bracket_hi ? Json({*c.bracket_lo, *c.bracket_hi}) : Json(nullptr);
  return j;
}

CommandResult cmd_fit(const RunConfig& c) {
  const Dataset d = load_dataset(c);
  const FitResult f = run_fit(d, c, true);
  const auto g = simulation::gof_quantiles(d.series, f, c.seed);
  CommandResult r;
  r.document = base_document(c);
  r.document["dataset"] = dataset_json(d, c);
  r.document["fit"] = fit_json(f);
  r.document["gof"] = gof_json(g);
  r.exit_code = exit_code_for(f);
  return r;
}

CommandResult cmd_forecast(const RunConfig& c) {
  const Dataset d = load_dataset(c);
  const FitResult f = run_fit(d, c, false);
  CommandResult r;
  r.document = base_document(c);
  r.document["dataset"] = dataset_json(d, c);
  r.document["fit"] = fit_json(f);
  if (!(c.horizon > 0.0)) throw InputError("--horizon must be positive");

  struct Start {
    const char* name;
    double year;
    double value;
    double t_max;
  };
  const Start starts[] = {
      {"initial", f.first_time, f.first_value, f.last_time - f.first_time + c.horizon},
      {"final", f.last_time, f.last_value, c.horizon},
  };
  Json bundles = Json::array();
  for (bool uncertain : {false, true}) {
    if (uncertain && !c.param_uncertainty) continue;
    for (const Start& s : starts) {
      const auto rc = rollout_config(c, s.t_max, 100000);
      const auto b = simulation::rollout_bundle(s.value, f, rc, uncertain);
      std::vector<double> hits;
      int capped = 0;
      for (std::size_t i = 0; i < b.causes.size(); ++i) {
        const bool hit = b.causes[i] == simulation::Termination::CapHit;
        capped += hit;
        hits.push_back(hit ? b.end_times[i] : kInf);
      }
      std::sort(hits.begin(), hits.end());
      const std::string file = std::string("forecast_") + s.name + (uncertain ? "_uncertain" : "") + "_bands.csv";
      std::string csv = "year";
      for (double l : simulation::band_levels()) {
        char buf[16];
        std::snprintf(buf, sizeof buf, ",q%02d", static_cast<int>(std::lround(l * 100)));
        csv += buf;
      }
      csv += "\n";
      for (std::size_t j = 0; j < b.grid.size(); ++j) {
        csv += fmt(s.year + b.grid[j]);
        for (double q : b.bands[j]) csv += "," + fmt(q);
        csv += "\n";
      }
      write_text(output_path(c, file), csv);
      r.files.push_back(file);
      bundles.push_back({{"start", s.name},
                         {"parameter_uncertainty", uncertain},
                         {"start_year", s.year},
                         {"start_value", s.value},
                         {"paths", rc.n_paths},
                         {"step", rc.step()},
                         {"value_cap", rc.value_cap},
                         {"cap_hits", capped},
                         {"clamped_paths", b.clamped_paths},
                         {"rejected_draws", b.rejected_draws},
                         {"median_cap_hit_year", number(s.year + stats::quantile_sorted(hits, 0.5))},
                         {"bands_file", file}});
    }
  }
  r.document["bundles"] = bundles;
  r.exit_code = exit_code_for(f);
  return r;
}

CommandResult cmd_gof(const RunConfig& c) {
  const Dataset d = load_dataset(c);
  const FitResult f = run_fit(d, c, false);
  const auto g = simulation::gof_quantiles(d.series, f, c.seed);
  CommandResult r;
  r.document = base_document(c);
  r.document["dataset"] = dataset_json(d, c);
  r.document["fit"] = {{"boundary", diffusion::to_string(f.boundary)},
                       {"B", number(f.derived.B.value)},
                       {"loglik", number(f.loglik)},
                       {"converged", f.converged}};
  r.document["gof"] = gof_json(g);
  Json q = Json::array();
  std::string csv = "year,u\n";
  for (std::size_t i = 0; i < g.u.size(); ++i) {
    q.push_back({{"year", g.times[i]}, {"u", number(g.u[i])}});
    csv += fmt(g.times[i]) + "," + fmt(g.u[i]) + "\n";
  }
  r.document["quantiles"] = q;
  write_text(output_path(c, "gof_quantiles.csv"), csv);
  r.files.push_back("gof_quantiles.csv");
  r.exit_code = exit_code_for(f);
  return r;
}

CommandResult cmd_rolling(const RunConfig& c) {
  const Dataset d = load_dataset(c);
  simulation::RollingOptions opts;
  opts.min_observations = c.min_observations;
  opts.with_param_uncertainty = c.param_uncertainty;
  opts.rollout = rollout_config(c, 1.0, 10000);
  opts.fit.boundary = c.boundary == "auto" ? estimation::BoundaryChoice::Absorbing : boundary_choice(c.boundary);
  const auto points = simulation::rolling_quantiles(d.series, opts);
  CommandResult r;
  r.document = base_document(c);
  r.document["dataset"] = dataset_json(d, c);
  Json q = Json::array();
  std::string csv = "year,u,fit_converged,B\n";
  std::vector<double> valid;
  for (const auto& p : points) {
    q.push_back({{"year", p.time}, {"u", number(p.u)}, {"fit_converged", p.fit_converged}, {"B", number(p.B)}});
    csv += fmt(p.time) + "," + fmt(p.u) + "," + (p.fit_converged ? "1" : "0") + "," + fmt(p.B) + "\n";
    if (std::isfinite(p.u)) valid.push_back(p.u);
  }
  r.document["quantiles"] = q;
  r.document["missing"] = points.size() - valid.size();
  if (valid.size() >= 2) {
    const auto ks = stats::ks_test_uniform(valid);
    r.document["ks_statistic"] = ks.statistic;
    r.document["ks_p"] = ks.p_value;
  }
  write_text(output_path(c, "rolling_quantiles.csv"), csv);
  r.files.push_back("rolling_quantiles.csv");
  return r;
}

CommandResult cmd_benchmark(const RunConfig& c) {
  const Dataset d = load_dataset(c);
  const FitResult f = run_fit(d, c, false);
  const auto truth = diffusion::primary_to_superexp(f.primary);
  std::vector<double> times;
  for (const auto& o : d.series) times.push_back(o.time);
  simulation::BenchmarkOptions opts;
  if (c.dt) opts.rollout.dt = *c.dt;
  if (c.value_cap) opts.rollout.value_cap = *c.value_cap;
  if (!(opts.rollout.value_cap > 0.0) || !(opts.rollout.dt > 0.0)) throw InputError("--dt and --value-cap must be positive");
  const int n = c.paths.value_or(1000);
  if (n < 1) throw InputError("--paths must be positive");
  const auto res = simulation::monte_carlo_benchmark(truth, times, n, c.seed, opts);
  CommandResult r;
  r.document = base_document(c);
  r.document["dataset"] = dataset_json(d, c);
  r.document["true_parameters"] = {{"s", truth.s}, {"B", truth.B}, {"delta", truth.delta}, {"sigma", truth.sigma}};
  r.document["start_value"] = opts.y0;
  r.document["generated"] = res.generated;
  r.document["retained"] = res.retained;
  r.document["both_converged"] = res.both_converged;
  const auto summary = [](const simulation::EstimatorSummary& e) {
    return Json{{"converged", e.converged},     {"convergence_rate", number(e.convergence_rate)},
                {"mean_B", number(e.mean_B)},   {"sd_B", number(e.sd_B)},
                {"bias", number(e.bias)},       {"bias_p", number(e.bias_p)}};
  };
  r.document["nls"] = summary(res.nls);
  r.document["ml"] = summary(res.ml);
  r.document["sd_ratio_nls_to_ml"] = number(res.sd_ratio);
  std::string csv = "path,nls_B,nls_converged,ml_B,ml_converged\n";
  for (std::size_t i = 0; i < res.nls_B.size(); ++i)
    csv += std::to_string(i) + "," + fmt(res.nls_B[i]) + "," + (res.nls_converged[i] ? "1" : "0") + "," +
           fmt(res.ml_B[i]) + "," + (res.ml_converged[i] ? "1" : "0") + "\n";
  write_text(output_path(c, "benchmark_estimates.csv"), csv);
  r.files.push_back("benchmark_estimates.csv");
  return r;
}

CommandResult cmd_stability(const RunConfig& c) {
  const growth::Scenario sc = load_growth_scenario(c);
  const auto& ep = sc.economy;
  CommandResult r;
  r.document = base_document(c);
  r.document["scenario"] = sc.name;
  Json factors = Json::array();
  for (int i = 0; i < ep.size(); ++i)
    factors.push_back({{"name", ep.names.empty() ? std::to_string(i) : ep.names[static_cast<std::size_t>(i)]},
                       {"alpha", ep.alpha(i)},
                       {"s", ep.s(i)},
                       {"phi", ep.phi(i)},
                       {"delta", ep.delta(i)},
                       {"y0", sc.y0(i)}});
  r.document["factors"] = factors;

  const Eigen::MatrixXd B = growth::build_B(ep);
  Json bj = Json::array();
  for (Eigen::Index i = 0; i < B.rows(); ++i) bj.push_back(vector_json(B.row(i).transpose()));
  r.document["B"] = bj;

  try {
    const auto st = growth::stability_at_stasis(ep);
    r.document["stasis"] = {{"point", vector_json(st.stasis)},
                            {"jacobian_eigenvalues", complex_list(st.eigenvalues)},
                            {"instability_condition", st.instability_condition},
                            {"scale_effect", st.scale_effect},
                            {"characteristic_at_zero", st.characteristic_at_zero},
                            {"determinant", st.determinant},
                            {"sufficient_for_instability", st.sufficient_for_instability},
                            {"unstable", st.unstable}};
  } catch (const DomainError& e) {
    r.document["stasis"] = {{"error", e.what()}};
  }

  const auto ce = growth::eigen_closed_form(ep);
  r.document["eigen"] = {{"numeric", complex_list(Eigen::EigenSolver<Eigen::MatrixXd>(B, false).eigenvalues())},
                         {"lambda_plus", ce.lambda_plus},
                         {"lambda_minus", ce.lambda_minus},
                         {"minus_one_multiplicity", ce.minus_one_multiplicity},
                         {"complex_roots", ce.complex_roots},
                         {"v_plus", ce.complex_roots ? Json(nullptr) : vector_json(ce.v_plus)},
                         {"v_minus", ce.complex_roots ? Json(nullptr) : vector_json(ce.v_minus)}};
  const auto dv = growth::divergence_exponent(ep);
  r.document["divergence"] = {{"lambda0", {dv.lambda0.real(), dv.lambda0.imag()}},
                              {"output_exponent", dv.output_exponent},
                              {"valid", dv.valid}};

  Json spaces = Json::array();
  std::vector<bool> all(static_cast<std::size_t>(ep.size()), true);
  std::vector<bool> tech_exo = all;
  tech_exo[0] = false;
  for (const auto& [label, part] : {std::pair{"fully endogenous", all}, std::pair{"technology exogenous", tech_exo}}) {
    try {
      const auto g = growth::growth_space_analysis(ep, part);
      spaces.push_back({{"partition", label},
                        {"z_star", vector_json(g.z_star)},
                        {"output_growth", g.output_growth},
                        {"output_growth_consolidated", g.output_growth_consolidated},
                        {"eigenvalues", complex_list(g.eigenvalues)},
                        {"scale_effect", g.scale_effect},
                        {"unstable", g.unstable}});
    } catch (const DomainError& e) {
      spaces.push_back({{"partition", label}, {"error", e.what()}});
    }
  }
  r.document["growth_space"] = spaces;

  if (c.bisect) {
    std::vector<int> shared;
    for (Eigen::Index i = 0; i < sc.y0.size(); ++i)
      if (sc.y0(i) == sc.y0(0)) shared.push_back(static_cast<int>(i));
    growth::SimulateOptions o;
    o.dt = c.dt.value_or(1e-3);
    o.t_max = c.t_max.value_or(sc.t_max);
    const double lo = c.bracket_lo.value_or(0.99 * sc.y0(0));
    const double hi = c.bracket_hi.value_or(1.01 * sc.y0(0));
    const auto bf = growth::bifurcation_threshold(sc, shared, lo, hi, o, 30);
    r.document["bifurcation"] = {{"decays_at", bf.decays_at}, {"explodes_at", bf.explodes_at}, {"dt", o.dt}, {"t_max", o.t_max}};
  }
  return r;
}

CommandResult cmd_growthsim(const RunConfig& c) {
  const growth::Scenario sc = load_growth_scenario(c);
  growth::SimulateOptions o;
  o.dt = c.dt.value_or(sc.dt);
  o.t_max = c.t_max.value_or(sc.t_max);
  o.record_interval = c.record_interval;
  const auto tr = growth::simulate(sc.economy, sc.y0, o);
  CommandResult r;
  r.document = base_document(c);
  r.document["scenario"] = sc.name;
  r.document["start_year"] = sc.start_year;
  r.document["y0"] = vector_json(sc.y0);
  r.document["dt"] = o.dt;
  r.document["outcome"] = growth::to_string(tr.outcome);
  r.document["end_year"] = sc.start_year + tr.end_time;
  std::size_t peak = 0;
  for (std::size_t i = 1; i < tr.output.size(); ++i)
    if (tr.output[i] > tr.output[peak]) peak = i;
  r.document["peak_output"] = number(tr.output[peak]);
  r.document["peak_year"] = sc.start_year + tr.t[peak];
  r.document["final_output"] = number(tr.output.back());

  std::string csv = "year";
  for (int i = 0; i < sc.economy.size(); ++i)
    csv += "," + (sc.economy.names.empty() ? "y" + std::to_string(i) : sc.economy.names[static_cast<std::size_t>(i)]);
  csv += ",Y\n";
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    csv += fmt(sc.start_year + tr.t[k]);
    for (Eigen::Index i = 0; i < tr.y[k].size(); ++i) csv += "," + fmt(tr.y[k](i));
    csv += "," + fmt(tr.output[k]) + "\n";
  }
  write_text(output_path(c, "growthsim_trajectory.csv"), csv);
  r.files.push_back("growthsim_trajectory.csv");
  return r;
}

CommandResult run(const RunConfig& c) {
  CommandResult r;
  if (c.command == "fit") r = cmd_fit(c);
  else if (c.command == "forecast") r = cmd_forecast(c);
  else if (c.command == "gof") r = cmd_gof(c);
  else if (c.command == "rolling") r = cmd_rolling(c);
  else if (c.command == "benchmark") r = cmd_benchmark(c);
  else if (c.command == "stability") r = cmd_stability(c);
  else if (c.command == "growthsim") r = cmd_growthsim(c);
  else throw InputError("unknown command '" + c.command + "'");
  write_text(output_path(c, c.command + ".json"), r.document.dump(2) + "\n");
  return r;
}

}  // namespace superexp::cli
