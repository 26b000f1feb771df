#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "nowcast/error.hpp"
#include "nowcast/motion.hpp"
#include "test_support.hpp"

namespace nowcast {
namespace {

VelocityField field_from(const LatticeGeometry& lattice, std::vector<Point> raw, std::vector<bool> valid = {}) {
  VelocityField f = uniform_velocity(lattice, {0, 0});
  f.raw = raw;
  f.smooth = raw;
  f.valid = valid.empty() ? std::vector<bool>(raw.size(), true) : valid;
  return f;
}

TEST(Trec, IdenticalScansGiveZeroVectors) {
  const testing::TextureCanvas canvas(64, 64, 11);
  const auto a = canvas.crop(0, 0, 64, 64, 0);
  const auto layout = build_layout(a.geometry(), 9, 4);
  const auto v = trec(a, a.with_timestamp(1), layout, MotionConfig{});
  for (std::size_t i = 0; i < v.count(); ++i) {
    ASSERT_TRUE(v.valid[i]);
    EXPECT_EQ(v.raw[i], (Point{0, 0}));
    EXPECT_NEAR(v.correlation[i], 1.0, 1e-12);
  }
}

TEST(Trec, RecoversIntegerShift) {
  const testing::TextureCanvas canvas(90, 90, 5);
  // Content moves 2 px east, 1 px north (+row).
  const auto a = canvas.crop(10, 10, 64, 64, 0);
  const auto b = canvas.crop(8, 9, 64, 64, 1);
  const auto layout = build_layout(a.geometry(), 9, 4);
  const auto v = trec(a, b, layout, MotionConfig{});
  std::size_t valid = 0, hit = 0;
  for (std::size_t i = 0; i < v.count(); ++i) {
    if (!v.valid[i]) continue;
    ++valid;
    hit += v.raw[i] == Point{2, 1};
  }
  ASSERT_GT(valid, 0u);
  EXPECT_GE(static_cast<double>(hit) / valid, 0.95);
}

TEST(Trec, FlatScansAreInvalid) {
  const ReflectivityField a(GridGeometry{40, 40, {0, 0}, 1.0}, 0, 0.0);
  const auto layout = build_layout(a.geometry(), 9, 4);
  const auto v = trec(a, a.with_timestamp(1), layout, MotionConfig{});
  for (std::size_t i = 0; i < v.count(); ++i) EXPECT_FALSE(v.valid[i]);
}

TEST(Trec, VectorsBoundedBySearchRadius) {
  const testing::TextureCanvas canvas(80, 80, 9);
  const auto a = canvas.crop(5, 5, 60, 60, 0);
  const auto b = canvas.crop(12, 0, 60, 60, 1);
  MotionConfig cfg;
  cfg.search_radius = 3;
  const auto layout = build_layout(a.geometry(), 9, 5);
  const auto v = trec(a, b, layout, cfg);
  for (std::size_t i = 0; i < v.count(); ++i) {
    EXPECT_LE(std::abs(v.raw[i].x), 3.0);
    EXPECT_LE(std::abs(v.raw[i].y), 3.0);
    if (v.valid[i]) {
      EXPECT_GE(v.correlation[i], -1.0);
      EXPECT_LE(v.correlation[i], 1.0);
    }
  }
}

TEST(Trec, RejectsDimensionMismatch) {
  const ReflectivityField a(GridGeometry{40, 40, {0, 0}, 1.0}, 0, 0.0);
  const ReflectivityField b(GridGeometry{41, 40, {0, 0}, 1.0}, 1, 0.0);
  EXPECT_THROW(trec(a, b, build_layout(a.geometry(), 9, 4), MotionConfig{}), DataError);
}

TEST(Trec, DeterministicAcrossRuns) {
  const testing::TextureCanvas canvas(70, 70, 2);
  const auto a = canvas.crop(3, 3, 60, 60, 0);
  const auto b = canvas.crop(2, 4, 60, 60, 1);
  const auto layout = build_layout(a.geometry(), 9, 5);
  const auto v1 = trec(a, b, layout, MotionConfig{});
  const auto v2 = trec(a, b, layout, MotionConfig{});
  EXPECT_EQ(v1.raw, v2.raw);
  EXPECT_EQ(v1.valid, v2.valid);
}

TEST(SmoothVelocity, ZeroLambdaIsIdentityOnValidArrays) {
  const LatticeGeometry lat{5, 5, {0, 0}, 1.0};
  std::mt19937 rng(1);
  std::normal_distribution<double> n(0, 1);
  std::vector<Point> raw(25);
  for (auto& p : raw) p = {n(rng), n(rng)};
  MotionConfig cfg;
  cfg.lambda = 0.0;
  const auto s = smooth_velocity(field_from(lat, raw), cfg);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_NEAR(s.smooth[i].x, raw[i].x, 1e-8);
    EXPECT_NEAR(s.smooth[i].y, raw[i].y, 1e-8);
  }
}

TEST(SmoothVelocity, UniformFieldUnchanged) {
  const LatticeGeometry lat{6, 7, {0, 0}, 2.5};
  const auto s = smooth_velocity(field_from(lat, std::vector<Point>(42, Point{1.25, -0.5})), MotionConfig{});
  for (const auto& p : s.smooth) {
    EXPECT_NEAR(p.x, 1.25, 1e-12);
    EXPECT_NEAR(p.y, -0.5, 1e-12);
  }
}

// Penalty Hessian recovered from divergence_penalty by polarization; the
// smoothing optimum then solves (I + lambda H) v = raw densely.
Eigen::VectorXd dense_smoothing(const std::vector<Point>& raw, int rows, int cols, double lambda) {
  const int n = rows * cols;
  auto penalty = [&](const Eigen::VectorXd& x) {
    std::vector<Point> f(n);
    for (int k = 0; k < n; ++k) f[k] = {x[2 * k], x[2 * k + 1]};
    return divergence_penalty(f, rows, cols);
  };
  Eigen::MatrixXd h(2 * n, 2 * n);
  for (int i = 0; i < 2 * n; ++i) {
    for (int j = 0; j < 2 * n; ++j) {
      Eigen::VectorXd ei = Eigen::VectorXd::Unit(2 * n, i), ej = Eigen::VectorXd::Unit(2 * n, j);
      h(i, j) = 0.5 * (penalty(ei + ej) - penalty(ei) - penalty(ej));
    }
  }
  Eigen::VectorXd b(2 * n);
  for (int k = 0; k < n; ++k) b.segment<2>(2 * k) << raw[k].x, raw[k].y;
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2 * n, 2 * n) + lambda * h;
  return a.ldlt().solve(b);
}

TEST(SmoothVelocity, MatchesDenseQuadraticSolve) {
  const LatticeGeometry lat{5, 5, {0, 0}, 1.0};
  std::mt19937 rng(4);
  std::normal_distribution<double> n(0, 1);
  std::vector<Point> raw(25);
  for (auto& p : raw) p = {n(rng), n(rng)};
  for (double lambda : {0.5, 1.0, 10.0}) {
    MotionConfig cfg;
    cfg.lambda = lambda;
    const auto s = smooth_velocity(field_from(lat, raw), cfg);
    const Eigen::VectorXd oracle = dense_smoothing(raw, 5, 5, lambda);
    for (int k = 0; k < 25; ++k) {
      EXPECT_NEAR(s.smooth[k].x, oracle[2 * k], 1e-8);
      EXPECT_NEAR(s.smooth[k].y, oracle[2 * k + 1], 1e-8);
    }
    EXPECT_LE(divergence_penalty(s.smooth, 5, 5), divergence_penalty(raw, 5, 5));
  }
}

TEST(SmoothVelocity, LargeLambdaRemovesPureDivergence) {
  const LatticeGeometry lat{5, 5, {0, 0}, 1.0};
  std::vector<Point> raw(25);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) raw[r * 5 + c] = {double(c), 0.0};
  }
  MotionConfig cfg;
  cfg.lambda = 1e4;
  const auto s = smooth_velocity(field_from(lat, raw), cfg);
  EXPECT_LT(std::sqrt(divergence_penalty(s.smooth, 5, 5)), 0.1 * std::sqrt(divergence_penalty(raw, 5, 5)));
  const Eigen::VectorXd oracle = dense_smoothing(raw, 5, 5, cfg.lambda);
  for (int k = 0; k < 25; ++k) EXPECT_NEAR(s.smooth[k].x, oracle[2 * k], 1e-6);
}

TEST(SmoothVelocity, PenaltyNeverIncreasesOnRandomFields) {
  std::mt19937 rng(8);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 3 + trial % 5, cols = 4 + trial % 3;
    const LatticeGeometry lat{rows, cols, {0, 0}, 1.0};
    std::vector<Point> raw(static_cast<std::size_t>(rows * cols));
    for (auto& p : raw) p = {n(rng), n(rng)};
    MotionConfig cfg;
    cfg.lambda = 0.1 * (trial + 1);
    const auto s = smooth_velocity(field_from(lat, raw), cfg);
    EXPECT_LE(divergence_penalty(s.smooth, rows, cols), divergence_penalty(raw, rows, cols) + 1e-12);
  }
}

TEST(SmoothVelocity, InvalidArraysAreFilledFromNeighbours) {
  const LatticeGeometry lat{5, 5, {0, 0}, 1.0};
  std::vector<Point> raw(25, Point{1.0, 2.0});
  std::vector<bool> valid(25, true);
  raw[12] = {0, 0};
  valid[12] = false;
  const auto s = smooth_velocity(field_from(lat, raw, valid), MotionConfig{});
  EXPECT_NEAR(s.smooth[12].x, 1.0, 1e-9);
  EXPECT_NEAR(s.smooth[12].y, 2.0, 1e-9);
}

TEST(SmoothVelocity, RejectsNegativeLambda) {
  const LatticeGeometry lat{3, 3, {0, 0}, 1.0};
  MotionConfig cfg;
  cfg.lambda = -1.0;
  EXPECT_THROW(smooth_velocity(field_from(lat, std::vector<Point>(9)), cfg), ConfigError);
}

TrackState lattice_track() {
  return start_track(build_layout(GridGeometry{40, 40, {0, 0}, 0.5}, 9, 5));
}

TEST(Translate, ZeroFieldLeavesPositions) {
  const auto track = lattice_track();
  const auto zero = uniform_velocity(LatticeGeometry{6, 6, {2.25, 2.25}, 2.5}, {0, 0});
  auto t = translate(translate(track, zero, +1), zero, +1);
  EXPECT_EQ(t.latest(), track.reference);
  t = translate(t, zero, -1);
  EXPECT_EQ(t.latest(), track.reference);
}

TEST(Translate, UniformFieldThreeSteps) {
  const auto track = lattice_track();
  const auto v = uniform_velocity(LatticeGeometry{6, 6, {2.25, 2.25}, 2.5}, {1.0, 0.5});
  auto t = track;
  for (int k = 0; k < 3; ++k) t = translate(t, v, +1);
  ASSERT_EQ(t.times(), 4u);
  for (std::size_t i = 0; i < t.arrays(); ++i) {
    EXPECT_NEAR(t.latest()[i].x - track.reference[i].x, 3.0, 1e-12);
    EXPECT_NEAR(t.latest()[i].y - track.reference[i].y, 1.5, 1e-12);
  }
}

TEST(Translate, InverseUndoesForwardOnRandomFields) {
  const auto track = lattice_track();
  std::mt19937 rng(3);
  std::normal_distribution<double> n(0, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    VelocityField v = uniform_velocity(LatticeGeometry{6, 6, {2.25, 2.25}, 2.5}, {0, 0});
    for (auto& p : v.smooth) p = {n(rng), n(rng)};
    const auto back = translate(translate(track, v, +1), v, -1);
    ASSERT_EQ(back.times(), 1u);
    for (std::size_t i = 0; i < track.arrays(); ++i) {
      EXPECT_NEAR(back.latest()[i].x, track.reference[i].x, 1e-9);
      EXPECT_NEAR(back.latest()[i].y, track.reference[i].y, 1e-9);
    }
  }
}

TEST(Translate, InverseAtFirstTimeRejected) {
  const auto track = lattice_track();
  const auto v = uniform_velocity(LatticeGeometry{6, 6, {2.25, 2.25}, 2.5}, {1, 0});
  EXPECT_THROW(translate(track, v, -1), DataError);
  EXPECT_THROW(translate(track, v, 2), DataError);
}

TEST(BackTrace, InvertsUniformMotion) {
  const auto v = uniform_velocity(LatticeGeometry{6, 6, {0, 0}, 2.5}, {1.0, -0.5});
  const Point p = back_trace({10.0, 10.0}, v, 3);
  EXPECT_NEAR(p.x, 7.0, 1e-12);
  EXPECT_NEAR(p.y, 11.5, 1e-12);
}

}  // namespace
}  // namespace nowcast
