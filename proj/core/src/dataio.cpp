#include "superexp/dataio.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "superexp/errors.hpp"

namespace superexp::dataio {

namespace detail {
extern const std::string_view kGwpCsv;
extern const std::string_view kPopulationCsv;
extern const std::string_view kGwpPerCapitaCsv;
extern const std::string_view kFranceGdpPerCapitaCsv;
}  // namespace detail

namespace {

struct Bundled {
  const char* name;
  const char* unit;
  const std::string_view* text;
};

const std::array<Bundled, 4> kBundled{{
    {"gwp", "billion 1990 $", &detail::kGwpCsv},
    {"population", "million", &detail::kPopulationCsv},
    {"gwp_per_capita", "1990 $", &detail::kGwpPerCapitaCsv},
    {"france_gdp_per_capita", "2011 $", &detail::kFranceGdpPerCapitaCsv},
}};

const Bundled* find_bundled(std::string_view name) {
  for (const auto& b : kBundled)
    if (name == b.name) return &b;
  return nullptr;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(std::string_view field, long line, const char* what) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end || field.empty())
    throw InputError(std::string("cannot parse ") + what + " '" + std::string(field) + "'", line);
  if (!std::isfinite(v)) throw InputError(std::string(what) + " must be finite", line);
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open series file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string stem_of(const std::string& path) {
  auto slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

}  // namespace

const std::vector<std::string>& bundled_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& b : kBundled) v.emplace_back(b.name);
    return v;
  }();
  return names;
}

bool is_bundled(std::string_view name) { return find_bundled(name) != nullptr; }

std::string_view bundled_csv(std::string_view name) {
  const Bundled* b = find_bundled(name);
  if (!b) throw InputError("unknown bundled dataset '" + std::string(name) + "'");
  return *b->text;
}

SeriesTable parse_csv(std::string_view text, std::string name, std::string unit) {
  SeriesTable table{std::move(name), std::move(unit), {}};
  bool header_seen = false;
  bool has_h = false;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line);
    if (!header_seen) {
      if (fields.size() < 2 || fields[0] != "year" || fields[1] != "value")
        throw InputError("header must be 'year,value[,h]'", line_no);
      if (fields.size() > 3 || (fields.size() == 3 && fields[2] != "h"))
        throw InputError("header must be 'year,value[,h]'", line_no);
      has_h = fields.size() == 3;
      header_seen = true;
      continue;
    }
    if (fields.size() != (has_h ? 3u : 2u) && !(has_h && fields.size() == 2))
      throw InputError("wrong number of fields", line_no);
    Row row{parse_number(fields[0], line_no, "year"), parse_number(fields[1], line_no, "value"),
            std::nullopt};
    if (!(row.value > 0.0)) throw InputError("value must be positive", line_no);
    if (has_h && fields.size() == 3 && !fields[2].empty()) {
      const double h = parse_number(fields[2], line_no, "h");
      if (h < 0.0) throw InputError("h must be nonnegative", line_no);
      row.h = h;
    }
    if (!table.rows.empty() && !(row.year > table.rows.back().year))
      throw InputError("years must be strictly increasing", line_no);
    table.rows.push_back(row);
  }
  if (!header_seen) throw InputError("empty series file");
  return table;
}

std::string load_source_text(const std::string& name_or_path) {
  if (const Bundled* b = find_bundled(name_or_path)) return std::string(*b->text);
  return read_file(name_or_path);
}

SeriesTable load_series(const std::string& name_or_path) {
  if (const Bundled* b = find_bundled(name_or_path)) return parse_csv(*b->text, b->name, b->unit);
  return parse_csv(read_file(name_or_path), stem_of(name_or_path));
}

double hyde_h(double year) {
  static constexpr std::array<double, 5> years{-9999.0, 1.0, 1700.0, 1900.0, 2000.0};
  static constexpr std::array<double, 5> hs{1.00, 0.75, 0.25, 0.05, 0.01};
  if (year <= years.front()) return hs.front();
  if (year >= years.back()) return hs.back();
  for (std::size_t i = 1; i < years.size(); ++i) {
    if (year <= years[i]) {
      const double f = (year - years[i - 1]) / (years[i] - years[i - 1]);
      return hs[i - 1] + f * (hs[i] - hs[i - 1]);
    }
  }
  return hs.back();
}

double weight_from_h(double h) { return 1.0 / (1.0 + 2.0 * h * h); }

std::vector<Observation> weights(const SeriesTable& table) {
  std::vector<Observation> obs;
  obs.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    const double h = r.h ? *r.h : hyde_h(r.year);
    obs.push_back({r.year, r.value, h, weight_from_h(h)});
  }
  return obs;
}

SeriesTable resample_decennial(const SeriesTable& table, double start_year) {
  SeriesTable out{table.name, table.unit, {}};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const Row& r = table.rows[i];
    const bool last = i + 1 == table.rows.size();
    if (r.year <= start_year || std::fmod(r.year, 10.0) == 0.0 || last) out.rows.push_back(r);
  }
  return out;
}

SeriesTable from_year(const SeriesTable& table, double year) {
  SeriesTable out{table.name, table.unit, {}};
  for (const auto& r : table.rows)
    if (r.year >= year) out.rows.push_back(r);
  return out;
}

SeriesTable perturb(const SeriesTable& table, int direction) {
  if (direction != 1 && direction != -1) throw DomainError("perturb: direction must be +1 or -1");
  SeriesTable out = table;
  for (auto& r : out.rows) {
    const double h = r.h ? *r.h : hyde_h(r.year);
    r.value *= std::exp(direction * h);
  }
  return out;
}

std::string checksum(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[hash & 0xf];
    hash >>= 4;
  }
  return out;
}

}  // namespace superexp::dataio
