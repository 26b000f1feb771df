#include <gtest/gtest.h>

#include "nowcast/advect.hpp"
#include "nowcast/error.hpp"
#include "nowcast/synth.hpp"
#include "test_support.hpp"

namespace nowcast {
namespace {

TEST(SampleReflectivity, ConstantField) {
  const ReflectivityField f(GridGeometry{50, 50, {0, 0}, 0.5}, 0, 20.0);
  const std::vector<Point> pos{{10.0, 10.0}, {7.3, 12.1}};
  const auto s = sample_reflectivity(f, pos, 19);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    EXPECT_TRUE(s.valid[i]);
    EXPECT_NEAR(s.values[i], 20.0, 1e-12);
  }
}

TEST(SampleReflectivity, StepEdgeMatchesEnumeration) {
  std::vector<double> v(40 * 40);
  for (int r = 0; r < 40; ++r) {
    for (int c = 0; c < 40; ++c) v[r * 40 + c] = c < 20 ? 0.0 : 40.0;
  }
  const ReflectivityField f(GridGeometry{40, 40, {0, 0}, 1.0}, 0, v);
  const auto s = sample_reflectivity(f, std::vector<Point>{{20.0, 20.0}}, 19);
  double sum = 0.0;
  for (int dy = -9; dy <= 9; ++dy) {
    for (int dx = -9; dx <= 9; ++dx) sum += f.at(20 + dx, 20 + dy);
  }
  EXPECT_DOUBLE_EQ(s.values[0], sum / 361.0);
  EXPECT_DOUBLE_EQ(s.values[0], 40.0 * 10.0 / 19.0);
}

TEST(SampleReflectivity, OffGridArraysInvalid) {
  const ReflectivityField f(GridGeometry{30, 30, {0, 0}, 1.0}, 0, 20.0);
  const auto s = sample_reflectivity(f, std::vector<Point>{{100.0, 100.0}, {2.0, 15.0}}, 9);
  EXPECT_FALSE(s.valid[0]);
  EXPECT_FALSE(s.valid[1]);  // footprint crosses the west edge
}

TEST(SampleReflectivity, MissingCellsBelowThresholdCountAsZero) {
  std::vector<double> v(9 * 9, 10.0);
  v[4 * 9 + 4] = kMissing;
  const ReflectivityField f(GridGeometry{9, 9, {0, 0}, 1.0}, 0, v);
  const auto s = sample_reflectivity(f, std::vector<Point>{{4.0, 4.0}}, 3);
  EXPECT_TRUE(s.valid[0]);
  EXPECT_DOUBLE_EQ(s.values[0], 80.0 / 9.0);
  std::vector<double> w(9 * 9, 10.0);
  for (int k : {30, 31, 39, 40}) w[k] = kMissing;
  const ReflectivityField g(GridGeometry{9, 9, {0, 0}, 1.0}, 0, w);
  EXPECT_FALSE(sample_reflectivity(g, std::vector<Point>{{4.0, 4.0}}, 3).valid[0]);
}

TEST(Growth, PersistentLevelGivesZero) {
  const ArraySample z{{10.0, 20.0, 30.0}, {true, true, true}};
  const auto g = growth_from_scans(z, z, 1);
  for (double v : g.values) EXPECT_EQ(v, 0.0);
}

TEST(Growth, UniformIncreaseHalved) {
  const ArraySample a{{10.0, 20.0}, {true, true}};
  const ArraySample b{{16.0, 26.0}, {true, true}};
  const auto g = growth_from_scans(a, b, 1);
  EXPECT_EQ(g.values, (std::vector<double>{3.0, 3.0}));
}

TEST(Growth, InvalidEndpointPropagates) {
  const ArraySample a{{10.0, 20.0}, {true, false}};
  const ArraySample b{{16.0, 26.0}, {true, true}};
  const auto g = growth_from_scans(a, b, 1);
  EXPECT_TRUE(g.valid[0]);
  EXPECT_FALSE(g.valid[1]);
  EXPECT_THROW(growth_from_scans(a, ArraySample{{1.0}, {true}}, 1), DataError);
}

TEST(Advance, Arithmetic) {
  const ArraySample prev{{30.0, 12.0}, {true, true}};
  GrowthField g;
  g.t = 1;
  g.values = {-2.5, 0.0};
  g.valid = {true, true};
  const auto next = advance_reflectivity(prev, g);
  EXPECT_EQ(next.values, (std::vector<double>{25.0, 12.0}));
  const auto back = growth_from_scans(prev, next, 1);
  EXPECT_EQ(back.values, g.values);
}

TEST(Advance, RoundTripOnRandomValues) {
  ArraySample prev, next;
  for (int i = 0; i < 50; ++i) {
    prev.values.push_back(0.37 * i - 4.0);
    next.values.push_back(std::sin(0.3 * i) * 20.0);
    prev.valid.push_back(true);
    next.valid.push_back(true);
  }
  const auto g = growth_from_scans(prev, next, 1);
  const auto again = advance_reflectivity(prev, g);
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(again.values[i], next.values[i], 1e-12);
}

TEST(Growth, SyntheticIntegerMotionRecoveredExactly) {
  SceneSpec spec;
  spec.width = spec.height = 64;
  spec.steps = 5;
  spec.velocity = {2.0, -1.0};
  spec.growth = GrowthKind::Stcar;
  spec.kernels = 3;
  spec.seed = 12;
  const Scene scene = generate_scene(spec);
  const auto& truth = scene.truth;
  for (const auto& g : truth.growth) {
    const auto t = static_cast<std::size_t>(g.t);
    const auto prev = sample_reflectivity(scene.frames[t - 1], truth.positions[t - 1], spec.array_size);
    const auto next = sample_reflectivity(scene.frames[t + 1], truth.positions[t + 1], spec.array_size);
    const auto est = growth_from_scans(prev, next, g.t);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.valid[i]) continue;
      ASSERT_TRUE(est.valid[i]);
      EXPECT_NEAR(est.values[i], g.values[i], 1e-9);
      ++checked;
    }
    EXPECT_GT(checked, 0u);
  }
}

}  // namespace
}  // namespace nowcast
