#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "superexp/dataio.hpp"
#include "superexp/errors.hpp"

namespace dio = superexp::dataio;

namespace {

const dio::Row* find(const dio::SeriesTable& t, double year) {
  for (const auto& r : t.rows)
    if (r.year == year) return &r;
  return nullptr;
}

int transitions(const dio::SeriesTable& t) { return static_cast<int>(t.rows.size()) - 1; }

}  // namespace

TEST(Bundled, NamesAndEndpoints) {
  for (const char* n : {"gwp", "population", "gwp_per_capita", "france_gdp_per_capita"})
    EXPECT_TRUE(dio::is_bundled(n)) << n;
  EXPECT_FALSE(dio::is_bundled("nope"));
  const auto gwp = dio::load_series("gwp");
  EXPECT_DOUBLE_EQ(gwp.rows.front().year, -999999);
  EXPECT_DOUBLE_EQ(gwp.rows.front().value, 0.05);
  EXPECT_DOUBLE_EQ(gwp.rows.back().year, 2019);
  EXPECT_DOUBLE_EQ(gwp.rows.back().value, 73640);
  ASSERT_NE(find(gwp, -9999), nullptr);
  EXPECT_DOUBLE_EQ(find(gwp, -9999)->value, 1.6);
}

TEST(Bundled, YearsStrictlyIncreasing) {
  for (const auto& n : dio::bundled_names()) {
    const auto t = dio::load_series(n);
    for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LT(t.rows[i - 1].year, t.rows[i].year) << n;
  }
}

TEST(Bundled, GwpIsPopulationTimesPerCapita) {
  const auto gwp = dio::load_series("gwp");
  const auto pop = dio::load_series("population");
  const auto pc = dio::load_series("gwp_per_capita");
  int checked = 0;
  for (const auto& r : gwp.rows) {
    const auto* p = find(pop, r.year);
    const auto* c = find(pc, r.year);
    if (!p || !c) continue;
    // Population in millions, per capita in dollars, GWP in billions.
    EXPECT_NEAR(p->value * c->value / 1000.0, r.value, 0.005 * r.value) << "year " << r.year;
    ++checked;
  }
  EXPECT_EQ(checked, static_cast<int>(gwp.rows.size()));
}

TEST(Parse, HeaderCommentsAndOptionalH) {
  const auto t = dio::parse_csv("# note\nyear,value,h\n1,2.5,0.3\n# mid\n10,3,\n", "x", "u");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.name, "x");
  EXPECT_EQ(t.unit, "u");
  ASSERT_TRUE(t.rows[0].h.has_value());
  EXPECT_DOUBLE_EQ(*t.rows[0].h, 0.3);
  EXPECT_FALSE(t.rows[1].h.has_value());
}

TEST(Parse, ErrorsCarryRowNumber) {
  auto row_of = [](const char* text) {
    try {
      dio::parse_csv(text, "x");
    } catch (const superexp::InputError& e) {
      return e.row();
    }
    return -1L;
  };
  EXPECT_EQ(row_of("year,value\n1,2\n1,3\n"), 3);      // duplicate year
  EXPECT_EQ(row_of("year,value\n5,2\n1,3\n"), 3);      // decreasing
  EXPECT_EQ(row_of("year,value\n1,2\n2,abc\n"), 3);    // not a number
  EXPECT_EQ(row_of("year,value\n1,2\n2,-1\n"), 3);     // nonpositive value
  EXPECT_EQ(row_of("year,value\n1,2\n2,1,1.5\n"), 3);  // h out of range
  EXPECT_EQ(row_of("yr,val\n1,2\n"), 1);               // bad header
}

TEST(Load, FileFromDiskAndMissingFile) {
  const auto path = std::filesystem::temp_directory_path() / "superexp_dataio_test.csv";
  {
    std::ofstream f(path);
    f << "year,value\n1900,10\n1950,20\n2000,40\n";
  }
  const auto t = dio::load_series(path.string());
  EXPECT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(dio::load_source_text(path.string()), "year,value\n1900,10\n1950,20\n2000,40\n");
  std::filesystem::remove(path);
  EXPECT_THROW(dio::load_series(path.string()), superexp::InputError);
}

TEST(HydeH, AnchorsAndInterpolation) {
  EXPECT_DOUBLE_EQ(dio::hyde_h(2000), 0.01);
  EXPECT_DOUBLE_EQ(dio::hyde_h(2019), 0.01);
  EXPECT_DOUBLE_EQ(dio::hyde_h(1900), 0.05);
  EXPECT_NEAR(dio::hyde_h(1800), 0.15, 1e-15);
  EXPECT_DOUBLE_EQ(dio::hyde_h(1700), 0.25);
  EXPECT_DOUBLE_EQ(dio::hyde_h(1), 0.75);
  EXPECT_DOUBLE_EQ(dio::hyde_h(-9999), 1.0);
  EXPECT_DOUBLE_EQ(dio::hyde_h(-50000), 1.0);
}

TEST(HydeH, NonincreasingBackInTime) {
  double prev = dio::hyde_h(2000);
  for (double y = 1999; y >= -10000; y -= 7) {
    const double h = dio::hyde_h(y);
    EXPECT_GE(h, prev) << y;
    prev = h;
  }
}

TEST(Weights, Values) {
  EXPECT_DOUBLE_EQ(dio::weight_from_h(1.0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(dio::weight_from_h(0.0), 1.0);
  EXPECT_DOUBLE_EQ(dio::weight_from_h(0.5), 2.0 / 3.0);
  const auto obs = dio::weights(dio::parse_csv("year,value,h\n1,1,0.2\n2000,2\n", "x"));
  EXPECT_DOUBLE_EQ(obs[0].h, 0.2);
  EXPECT_DOUBLE_EQ(obs[1].h, 0.01);
  EXPECT_NEAR(obs[1].weight, 0.9998, 1e-4);
}

TEST(Resample, SampleSizes) {
  const auto gwp = dio::load_series("gwp");
  EXPECT_EQ(transitions(gwp), 100);
  EXPECT_EQ(transitions(dio::resample_decennial(gwp)), 38);
  EXPECT_EQ(transitions(dio::from_year(gwp, -9999)), 97);
  EXPECT_EQ(transitions(dio::from_year(dio::resample_decennial(gwp), -9999)), 35);
  const auto pop = dio::from_year(dio::resample_decennial(dio::load_series("population")), -9999);
  EXPECT_EQ(transitions(pop), 37);
  const auto pc = dio::from_year(dio::resample_decennial(dio::load_series("gwp_per_capita")), -9999);
  EXPECT_EQ(transitions(pc), 35);
}

TEST(Resample, KeepsFinalRowAndIsIdempotent) {
  const auto d = dio::resample_decennial(dio::load_series("gwp"));
  EXPECT_DOUBLE_EQ(d.rows.back().year, 2019);
  for (const auto& r : d.rows)
    if (r.year > 1950 && r.year != 2019) EXPECT_EQ(std::fmod(r.year, 10.0), 0.0);
  const auto twice = dio::resample_decennial(d);
  ASSERT_EQ(twice.rows.size(), d.rows.size());
  const auto early = dio::parse_csv("year,value\n1800,1\n1900,2\n1940,3\n", "x");
  EXPECT_EQ(dio::resample_decennial(early).rows.size(), 3u);
}

TEST(Perturb, ScalesByExpH) {
  const auto t = dio::parse_csv("year,value,h\n1,10,0\n2,10,0.5\n2000,10\n", "x");
  const auto up = dio::perturb(t, 1);
  const auto down = dio::perturb(t, -1);
  EXPECT_DOUBLE_EQ(up.rows[0].value, 10.0);
  EXPECT_DOUBLE_EQ(down.rows[0].value, 10.0);
  EXPECT_NEAR(up.rows[1].value, 10.0 * std::exp(0.5), 1e-12);
  EXPECT_NEAR(down.rows[1].value, 10.0 * std::exp(-0.5), 1e-12);
  EXPECT_NEAR(up.rows[2].value, 10.0 * std::exp(0.01), 1e-12);
  EXPECT_THROW(dio::perturb(t, 0), superexp::DomainError);
}

TEST(Checksum, KnownDigests) {
  // FNV-1a 64-bit reference values.
  EXPECT_EQ(dio::checksum(""), "cbf29ce484222325");
  EXPECT_EQ(dio::checksum("a"), "af63dc4c8601ec8c");
  EXPECT_NE(dio::checksum(dio::bundled_csv("gwp")), dio::checksum(dio::bundled_csv("population")));
}
