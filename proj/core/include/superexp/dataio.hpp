#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "superexp/observation.hpp"

namespace superexp::dataio {

struct Row {
  double year;
  double value;
  std::optional<double> h;
};

/// Years use astronomical numbering: 1 BCE is 0, 10,000 BCE is -9999.
struct SeriesTable {
  std::string name;
  std::string unit;
  std::vector<Row> rows;
};

/// Names of the datasets compiled into the library.
const std::vector<std::string>& bundled_names();
bool is_bundled(std::string_view name);
std::string_view bundled_csv(std::string_view name);

/// Parses `year,value[,h]` CSV text with a header row. Lines starting with '#'
/// are ignored. Throws InputError with the 1-based line number.
SeriesTable parse_csv(std::string_view text, std::string name, std::string unit = "");

/// Loads a bundled dataset by name, or otherwise a CSV file from disk.
SeriesTable load_series(const std::string& name_or_path);

/// Raw bytes behind `load_series`, for checksumming.
std::string load_source_text(const std::string& name_or_path);

/// Historical uncertainty indicator, piecewise linear through
/// (2000, 0.01), (1900, 0.05), (1700, 0.25), (1, 0.75), (-9999, 1.00).
double hyde_h(double year);

double weight_from_h(double h);

/// Observations with h taken from the table or from hyde_h.
std::vector<Observation> weights(const SeriesTable& table);

/// Keeps rows up to and including `start_year`, later rows on multiples of
/// ten, and the final row.
SeriesTable resample_decennial(const SeriesTable& table, double start_year = 1950);

/// Drops rows before `year`.
SeriesTable from_year(const SeriesTable& table, double year);

/// Multiplies every value by e^{direction * h}.
SeriesTable perturb(const SeriesTable& table, int direction);

/// FNV-1a 64-bit digest as 16 hex digits.
std::string checksum(std::string_view bytes);

}  // namespace superexp::dataio
