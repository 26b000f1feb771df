#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nowcast/advect.hpp"
#include "nowcast/geometry.hpp"
#include "nowcast/raster.hpp"

namespace nowcast {

enum class MotionKind { Uniform, Rotational, Divergent };
enum class GrowthKind { Zero, Constant, Stcar };

struct SceneSpec {
  int width = 128;
  int height = 128;
  double cell_km = 0.5;
  Point origin{};
  int steps = 7;
  long long timestamp0 = 0;
  long long time_step = 1;

  MotionKind motion = MotionKind::Uniform;
  Point velocity{2.0, 1.0};  // pixels per step (uniform)
  double omega = 0.0;        // radians per step about the grid center (rotational)
  double alpha = 0.0;        // relative expansion per step about the grid center (divergent)

  double background = 5.0;
  int blobs = 12;
  double blob_amplitude_min = 15.0;
  double blob_amplitude_max = 40.0;
  double blob_sigma_min = 4.0;  // pixels
  double blob_sigma_max = 12.0;
  double noise = 6.0;           // uniform texture amplitude, dBZ

  GrowthKind growth = GrowthKind::Zero;
  double growth_rate = 0.0;  // constant growth, dBZ per step

  // STCAR growth driver on the array lattice.
  int array_size = 19;
  int spacing = 5;
  int kernels = 4;
  double bandwidth_km = 10.0;
  double gamma_scale = 1.0;
  double rho = 0.5;
  double sigma = 1.0;
  std::vector<double> r{0.9, -0.3};
  int burn_in = 50;

  int search_radius = 5;  // motion magnitudes must stay within it
  std::uint64_t seed = 1;

  void validate() const;
};

SceneSpec parse_scene_spec(std::string_view text, const std::string& source = "<scene>");
std::string format_scene_spec(const SceneSpec& spec);

struct SceneTruth {
  ArrayLayout layout;
  std::vector<std::vector<Point>> positions;   // [t][i], km
  std::vector<std::vector<Point>> velocities;  // [t][i], km per step at lattice centers, t < steps - 1
  std::vector<GrowthField> growth;             // interior times 1 .. steps - 2
  // STCAR driver parameters (growth = stcar).
  std::vector<Point> kernel_centers;
  Eigen::VectorXd gamma;
  double rho = 0.0;
  double sigma = 0.0;
  std::vector<double> r;
};

struct Scene {
  std::vector<ReflectivityField> frames;
  SceneTruth truth;
};

/// Material-canvas construction: M_1 = M_0 + g_0, M_{t+1} = M_{t-1} + 2 g_t,
/// frame t shows M_t carried by the motion map. Integer uniform motion makes
/// every frame an exact shift of the canvas.
Scene generate_scene(const SceneSpec& spec);

/// Map from material pixel coordinates to frame-t pixel coordinates, and its inverse.
Point motion_forward(const SceneSpec& spec, Point material_px, double t);
Point motion_inverse(const SceneSpec& spec, Point frame_px, double t);

struct ErrorReport {
  double max_abs = 0.0;
  double rmse = 0.0;
  double bias = 0.0;
  double mismatch_fraction = 0.0;  // share with |error| > tolerance
  std::size_t count = 0;
};

/// Componentwise error statistics over entries where `valid` holds (all when empty).
ErrorReport truth_compare(std::span<const double> estimated, std::span<const double> truth, double tolerance = 0.0,
                          const std::vector<bool>& valid = {});
/// Vector version: errors are Euclidean norms of the differences; bias is the mean x/y error norm.
ErrorReport truth_compare(std::span<const Point> estimated, std::span<const Point> truth, double tolerance = 0.0,
                          const std::vector<bool>& valid = {});

}  // namespace nowcast
