#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "nowcast/error.hpp"
#include "nowcast/raster.hpp"
#include "nowcast/text_io.hpp"
#include "test_support.hpp"

namespace nowcast {
namespace {

// Largest number of centers along one axis such that every footprint fits.
int brute_force_axis_count(int extent, int size, int spacing) {
  const int half = size / 2;
  int best = 0;
  for (int start = half; start < extent; ++start) {
    int count = 0;
    for (int p = start; p + half <= extent - 1; p += spacing) ++count;
    best = std::max(best, count);
  }
  return best;
}

TEST(BuildLayout, FullRadarGridHas93By93Arrays) {
  const auto layout = build_layout(480, 480, 19, 5);
  EXPECT_EQ(layout.count(), 8649u);
  EXPECT_EQ(layout.lattice.rows, 93);
  EXPECT_EQ(layout.lattice.cols, 93);
}

TEST(BuildLayout, SingleFootprintSitsAtMidpoint) {
  const auto layout = build_layout(19, 19, 19, 5);
  ASSERT_EQ(layout.count(), 1u);
  EXPECT_EQ(layout.center_cols[0], 9);
  EXPECT_EQ(layout.center_rows[0], 9);
}

TEST(BuildLayout, CountMatchesBruteForce) {
  const auto layout = build_layout(64, 64, 9, 4);
  EXPECT_EQ(layout.count(), 196u);
  for (int extent : {19, 20, 33, 64, 101}) {
    for (int size : {3, 5, 9, 19}) {
      if (size > extent) continue;
      for (int spacing : {1, 2, 4, 5, 7}) {
        const auto l = build_layout(extent, extent + 3, size, spacing);
        EXPECT_EQ(l.lattice.cols, brute_force_axis_count(extent, size, spacing));
        EXPECT_EQ(l.lattice.rows, brute_force_axis_count(extent + 3, size, spacing));
      }
    }
  }
}

TEST(BuildLayout, EveryFootprintInsideGrid) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 10 + static_cast<int>(rng() % 90), h = 10 + static_cast<int>(rng() % 90);
    const int size = 3 + 2 * static_cast<int>(rng() % 4);
    const int spacing = 1 + static_cast<int>(rng() % 6);
    const auto l = build_layout(w, h, size, spacing);
    for (std::size_t i = 0; i < l.count(); ++i) {
      EXPECT_GE(l.center_cols[i] - size / 2, 0);
      EXPECT_LE(l.center_cols[i] + size / 2, w - 1);
      EXPECT_GE(l.center_rows[i] - size / 2, 0);
      EXPECT_LE(l.center_rows[i] + size / 2, h - 1);
    }
  }
}

TEST(BuildLayout, SpacingInKilometres) {
  const auto layout = build_layout(GridGeometry{480, 480, {0, 0}, 0.5}, 19, 5);
  EXPECT_DOUBLE_EQ(layout.lattice.spacing_km, 2.5);
  EXPECT_DOUBLE_EQ(layout.centers[1].x - layout.centers[0].x, 2.5);
}

TEST(BuildLayout, RejectsEvenOrOversizedArrays) {
  EXPECT_THROW(build_layout(64, 64, 8, 4), ConfigError);
  EXPECT_THROW(build_layout(10, 64, 11, 4), ConfigError);
  EXPECT_THROW(build_layout(64, 64, 9, 0), ConfigError);
}

TEST(ExtractPatch, ConstantField) {
  const ReflectivityField f(GridGeometry{30, 30, {0, 0}, 1.0}, 0, 30.0);
  const auto p = extract_patch(f, {12.3, 15.8}, 5);
  for (double v : p.values) EXPECT_DOUBLE_EQ(v, 30.0);
}

TEST(ExtractPatch, IntegerCenterIsExactSubgrid) {
  const testing::TextureCanvas canvas(40, 40, 3);
  const auto f = canvas.crop(0, 0, 40, 40, 0);
  const auto p = extract_patch(f, {20.0, 11.0}, 7);
  std::size_t k = 0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx, ++k) EXPECT_EQ(p.values[k], f.at(20 + dx, 11 + dy));
  }
}

TEST(ExtractPatch, HalfPixelOffsetAveragesNeighbours) {
  // Ramp 2 + 3 col + 5 row on a 3x3 grid; the center moves half a pixel east.
  const auto f = testing::ramp_field(3, 3, 2.0, 3.0, 5.0);
  const auto p = extract_patch(f, {1.5, 1.0}, 1);
  ASSERT_EQ(p.values.size(), 1u);
  EXPECT_DOUBLE_EQ(p.values[0], 0.5 * (f.at(1, 1) + f.at(2, 1)));
  const auto q = extract_patch(f, {0.5, 1.0}, 3);
  // Row 1 of the 3x3 patch: midpoints of (-0.5..1.5) cells; the west one is off grid.
  EXPECT_TRUE(is_missing(q.values[3]));
  EXPECT_DOUBLE_EQ(q.values[4], 0.5 * (f.at(0, 1) + f.at(1, 1)));
  EXPECT_DOUBLE_EQ(q.values[5], 0.5 * (f.at(1, 1) + f.at(2, 1)));
  EXPECT_EQ(q.outside, 3u);
}

TEST(ExtractPatch, RejectsEmptyIntersection) {
  const ReflectivityField f(GridGeometry{10, 10, {0, 0}, 1.0}, 0, 1.0);
  EXPECT_THROW(extract_patch(f, {40.0, 40.0}, 3), DataError);
}

TEST(RasterIo, RoundTripIsExact) {
  std::vector<double> v{0.1, -3.25, 1e-17, 42.0, kMissing, 7.0 / 3.0, 55.5, 0.0,
                        1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
  const ReflectivityField f(GridGeometry{4, 4, {1.5, -2.0}, 0.5}, 12, v);
  const auto g = parse_field(format_field(f));
  EXPECT_EQ(g.geometry(), f.geometry());
  EXPECT_EQ(g.timestamp(), 12);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (is_missing(v[i])) EXPECT_TRUE(is_missing(g.values()[i]));
    else EXPECT_EQ(g.values()[i], v[i]);
  }
  EXPECT_EQ(format_field(g), format_field(f));
}

TEST(RasterIo, FileRoundTripWithTrailer) {
  const auto path = std::filesystem::temp_directory_path() / "nowcast_raster_roundtrip.radar";
  const auto f = testing::ramp_field(5, 3, 1.0, 0.5, 0.25);
  write_field(f, path, "FORECAST method=stcar base=1 horizon=2");
  const auto g = read_field(path);
  EXPECT_EQ(format_field(g), format_field(f));
  std::filesystem::remove(path);
}

TEST(RasterIo, NanTokenMarksMissingCell) {
  const std::string text =
      "RADAR v1 4 4 0 0 1 0\n"
      "1 2 3 4\n"
      "1 2 3 4\n"
      "1 2 3 NaN\n"
      "1 2 3 4\n";
  const auto f = parse_field(text);
  EXPECT_TRUE(is_missing(f.at(3, 2)));
  EXPECT_EQ(f.at(2, 3), 3.0);
  const auto g = parse_field("RADAR v1 2 1 0 0 1 0\nNA 5\n");
  EXPECT_TRUE(is_missing(g.at(0, 0)));
}

TEST(RasterIo, MalformedHeaderRejected) {
  EXPECT_THROW(parse_field("RADAR v2 2 1 0 0 1 0\n1 2\n"), DataError);
  EXPECT_THROW(parse_field("RADAR v1 2 2 0 0 1 0\n1 2\n"), DataError);
  EXPECT_THROW(parse_field("RADAR v1 2 1 0 0 -1 0\n1 2\n"), DataError);
}

TEST(RasterSequence, DuplicateTimestampRejected) {
  const ReflectivityField a(GridGeometry{3, 3, {0, 0}, 1.0}, 5, 1.0);
  const std::vector<ReflectivityField> seq{a, a};
  try {
    validate_sequence(seq);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("non-monotone timestamps"), std::string::npos);
  }
}

TEST(RasterSequence, InconsistentDimensionsRejected) {
  const std::vector<ReflectivityField> seq{ReflectivityField(GridGeometry{3, 3, {0, 0}, 1.0}, 0, 1.0),
                                           ReflectivityField(GridGeometry{4, 3, {0, 0}, 1.0}, 1, 1.0)};
  EXPECT_THROW(validate_sequence(seq), DataError);
}

TEST(RasterIo, MissingFileNamesPath) {
  try {
    read_field("/nonexistent/scan.radar");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/scan.radar"), std::string::npos);
  }
}

}  // namespace
}  // namespace nowcast
