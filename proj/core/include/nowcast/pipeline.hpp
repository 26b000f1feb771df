#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nowcast/advect.hpp"
#include "nowcast/estimate.hpp"
#include "nowcast/forecast.hpp"
#include "nowcast/motion.hpp"
#include "nowcast/raster.hpp"
#include "nowcast/stcar.hpp"

namespace nowcast {

struct PipelineConfig {
  int array_size = 19;
  int spacing = 5;
  MotionConfig motion;
  int kernels = 30;
  double bandwidth_km = 10.0;
  double neighbor_distance_km = 0.0;  // 0: 1.5 x lattice spacing
  WeightFunction weight = WeightFunction::Binary;
  EstimationConfig estimation;
  int horizon = 6;
  double threshold_dbz = 35.0;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the key for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;
  double neighbor_distance(const ArrayLayout& layout) const;

  static const std::vector<std::string>& keys();
};

PipelineConfig parse_config(std::string_view text, const std::string& source = "<config>");
std::string format_config(const PipelineConfig& cfg);

/// Motion, tracking and growth extraction over one scan window.
struct PreparedSequence {
  ArrayLayout layout;
  std::vector<long long> timestamps;
  std::vector<VelocityField> velocities;  // between scans k and k + 1
  TrackState track;                       // positions at every scan
  std::vector<ArraySample> samples;       // Z along trajectories; invalid stays invalid
  std::vector<GrowthField> growth;        // interior scans 1 .. T - 2
};

PreparedSequence prepare(std::span<const ReflectivityField> scans, const PipelineConfig& cfg);

/// Arrays valid at every growth time, with arrays isolated under the
/// neighbourhood removed until none remain.
std::vector<std::size_t> active_arrays(const PreparedSequence& prepared, const Neighborhood& full);

struct FitResult {
  StcarFit fit;
  std::vector<std::string> warnings;
};

/// Kernel placement, per-time IRWGLS and temporal WLS.
FitResult estimate_fit(const PreparedSequence& prepared, const PipelineConfig& cfg);

/// Parameters as stored on disk; structures are rebuilt from the scans.
struct FitFile {
  int array_size = 0;
  int spacing = 0;
  GridGeometry grid{};
  std::size_t arrays = 0;
  std::vector<std::size_t> active;
  double neighbor_distance_km = 0.0;
  WeightFunction weight = WeightFunction::Binary;
  double bandwidth_km = 0.0;
  std::vector<Point> kernel_centers;
  std::vector<double> r;

  struct Block {
    long long timestamp = 0;
    double rho = 0.0;
    double sigma = 0.0;
    double loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> gamma;
  };
  std::vector<Block> times;
};

FitFile to_fit_file(const StcarFit& fit, const PreparedSequence& prepared);
std::string format_fit_file(const FitFile& file);
FitFile parse_fit_file(std::string_view text, const std::string& source = "<fit>");
void write_fit_file(const FitFile& file, const std::filesystem::path& path);
FitFile read_fit_file(const std::filesystem::path& path);

/// Rebuilds the fitted model on a prepared window: structures and growth
/// from the scans, parameters from the file, matched by growth timestamp.
StcarFit assemble_fit(const FitFile& file, const PreparedSequence& prepared);

/// Trajectory state at the last two scans for the fitted arrays.
ForecastSetup forecast_setup(const PreparedSequence& prepared, std::span<const std::size_t> arrays);

}  // namespace nowcast
