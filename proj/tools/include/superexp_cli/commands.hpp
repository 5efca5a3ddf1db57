#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace superexp::cli {

using Json = nlohmann::ordered_json;

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitInputError = 3;

struct RunConfig {
  std::string command;
  std::string dataset = "gwp";
  bool decennial = false;
  std::optional<double> from_year;
  std::string boundary = "auto";
  /// Multiply values by e^{perturb * h}: -1, 0 or 1.
  int perturb = 0;
  /// Defaults depend on the command: 10000 rollouts, 1000 benchmark paths.
  std::optional<int> paths;
  std::optional<double> dt;
  /// Steps per rollout when dt is not given: 100000 for forecasts, 10000 for
  /// rolling quantiles.
  std::optional<int> steps;
  /// Level at which a rollout counts as exploded. Forecasts default to 1e12 so
  /// cap-hit times track explosion times; the benchmark keeps 1e5.
  std::optional<double> value_cap;
  std::uint64_t seed = 0;
  bool param_uncertainty = false;
  /// Forecast years beyond the final observation.
  double horizon = 100.0;
  int min_observations = 5;
  std::string scenario = "baseline";
  bool resource = false;
  std::optional<double> shared_start;
  std::optional<double> t_max;
  double record_interval = 1.0;
  bool bisect = false;
  std::optional<double> bracket_lo, bracket_hi;
  /// Output directory; documents and columnar files are written here.
  std::string out = ".";
};

/// Outcome of a command: the structured document, its exit code, and any
/// columnar files written next to it.
struct CommandResult {
  Json document;
  int exit_code = kExitOk;
  std::vector<std::string> files;
};

Json config_echo(const RunConfig& config);

CommandResult cmd_fit(const RunConfig& config);
CommandResult cmd_forecast(const RunConfig& config);
CommandResult cmd_gof(const RunConfig& config);
CommandResult cmd_rolling(const RunConfig& config);
CommandResult cmd_benchmark(const RunConfig& config);
CommandResult cmd_stability(const RunConfig& config);
CommandResult cmd_growthsim(const RunConfig& config);

/// Dispatches on config.command, writes `<out>/<command>.json` and returns the
/// result. Input errors propagate as exceptions.
CommandResult run(const RunConfig& config);

}  // namespace superexp::cli
