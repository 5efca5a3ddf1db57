#include <CLI11.hpp>

#include <exception>
#include <iostream>

#include "superexp/errors.hpp"
#include "superexp/version.hpp"
#include "superexp_cli/commands.hpp"

namespace {

using superexp::cli::RunConfig;

void add_data_flags(CLI::App* sub, RunConfig& c) {
  sub->add_option("--dataset", c.dataset, "Bundled series name (gwp, population, gwp_per_capita, france_gdp_per_capita) or CSV path");
  sub->add_flag("--decennial", c.decennial, "Keep one observation per decade after 1950");
  sub->add_option("--from-year", c.from_year, "Drop observations before this year");
  sub->add_option("--boundary", c.boundary, "Boundary kind at X = 0")
      ->check(CLI::IsMember({"auto", "absorbing", "reflecting"}));
  sub->add_option("--perturb", c.perturb, "Scale values by exp(perturb * h)")->check(CLI::IsMember({-1, 0, 1}));
}

void add_rollout_flags(CLI::App* sub, RunConfig& c) {
  sub->add_option("--paths", c.paths, "Number of simulated paths");
  sub->add_option("--dt", c.dt, "Simulation time step in years");
  sub->add_option("--steps", c.steps, "Steps per rollout when --dt is not given");
  sub->add_option("--value-cap", c.value_cap, "Level treated as explosion, in series units");
  sub->add_flag("--param-uncertainty", c.param_uncertainty, "Draw parameters from the fitted sampling distribution");
}

void add_growth_flags(CLI::App* sub, RunConfig& c) {
  sub->add_option("--scenario", c.scenario, "Scenario file or 'baseline'");
  sub->add_flag("--resource", c.resource, "Add a natural resource stock eroded by activity");
  sub->add_option("--shared-start", c.shared_start, "Starting value for factors that share technology's start");
  sub->add_option("--t-max", c.t_max, "Integration horizon in years");
  sub->add_option("--dt", c.dt, "Integration step in years");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Superexponential growth diffusion: fitting, forecasting and growth-model analysis"};
  app.set_version_flag("--version", std::string(superexp::kVersion));
  app.require_subcommand(1);
  RunConfig c;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--out", c.out, "Output directory");
  };

  auto* fit = app.add_subcommand("fit", "Fit the diffusion by weighted dynamic maximum likelihood");
  add_data_flags(fit, c);
  common(fit);

  auto* forecast = app.add_subcommand("forecast", "Quantile bands of simulated rollouts");
  add_data_flags(forecast, c);
  add_rollout_flags(forecast, c);
  forecast->add_option("--horizon", c.horizon, "Years simulated beyond the final observation");
  common(forecast);

  auto* gof = app.add_subcommand("gof", "Conditional CDF quantiles of each observation");
  add_data_flags(gof, c);
  common(gof);

  auto* rolling = app.add_subcommand("rolling", "Quantiles of each observation under refits to its past");
  add_data_flags(rolling, c);
  add_rollout_flags(rolling, c);
  rolling->add_option("--min-observations", c.min_observations, "Smallest prefix that is refitted");
  common(rolling);

  auto* bench = app.add_subcommand("benchmark", "Monte Carlo comparison of least squares and ML");
  add_data_flags(bench, c);
  bench->add_option("--paths", c.paths, "Number of retained paths");
  bench->add_option("--dt", c.dt, "Simulation time step in years");
  bench->add_option("--value-cap", c.value_cap, "Level at which generated paths stop");
  common(bench);

  auto* stability = app.add_subcommand("stability", "Stasis, eigen-structure and growth-space analysis");
  add_growth_flags(stability, c);
  stability->add_flag("--bisect", c.bisect, "Locate the explode/decay threshold of the shared start");
  stability->add_option("--bracket-lo", c.bracket_lo, "Decaying end of the bisection bracket");
  stability->add_option("--bracket-hi", c.bracket_hi, "Exploding end of the bisection bracket");
  common(stability);

  auto* growthsim = app.add_subcommand("growthsim", "Integrate the deterministic growth model");
  add_growth_flags(growthsim, c);
  growthsim->add_option("--record-interval", c.record_interval, "Spacing of recorded points in years");
  common(growthsim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return superexp::cli::kExitInputError;
  }
  c.command = app.get_subcommands().front()->get_name();

  try {
    const auto result = superexp::cli::run(c);
    std::cout << result.document.dump(2) << "\n";
    if (result.exit_code == superexp::cli::kExitNotConverged)
      std::cerr << "superexp: fit did not converge\n";
    return result.exit_code;
  } catch (const superexp::InputError& e) {
    std::cerr << "superexp: input error: " << e.what() << "\n";
    return superexp::cli::kExitInputError;
  } catch (const superexp::ConvergenceError& e) {
    std::cerr << "superexp: " << e.what() << "\n";
    return superexp::cli::kExitNotConverged;
  } catch (const superexp::DomainError& e) {
    std::cerr << "superexp: " << e.what() << "\n";
    return superexp::cli::kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "superexp: " << e.what() << "\n";
    return 1;
  }
}
