#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "nowcast/motion.hpp"
#include "nowcast/raster.hpp"
#include "nowcast/stcar.hpp"

namespace nowcast {

enum class ForecastMethod { Stcar, Persistence };

std::string to_string(ForecastMethod method);
ForecastMethod parse_method(const std::string& text);

/// Growth field with the structure that transforms it (B = I - rho W_D^{-1} W).
struct GrowthState {
  CarStructure car;
  double rho = 0.0;
  Eigen::VectorXd growth;
};

/// Mean of G_{t'}: sum_j r_j B_{t'}^{-1} B_{t'-j} G_{t'-j}; `history` is
/// oldest first and must hold at least r.size() entries.
Eigen::VectorXd predict_growth(std::span<const double> r, const CarStructure& car, double rho,
                               std::span<const GrowthState> history);

/// Trajectory state at the last two observed scans for the fitted array set.
struct ForecastSetup {
  std::vector<std::size_t> arrays;  // layout indices
  std::vector<Point> prev_positions;
  std::vector<Point> last_positions;
  Eigen::VectorXd z_prev;  // Z_{t'-1} along trajectories
  Eigen::VectorXd z_last;  // Z_{t'}
  long long base_time = 0;  // timestamp of the last scan
  long long time_step = 1;
};

struct Forecast {
  ForecastMethod method = ForecastMethod::Persistence;
  long long base_time = 0;
  std::vector<std::size_t> arrays;
  Eigen::VectorXd reference;  // Z_{t'} at the base positions
  std::vector<long long> timestamps;
  std::vector<std::vector<Point>> positions;  // per step
  std::vector<Eigen::VectorXd> mean;          // dBZ per step, unclamped
  std::vector<Eigen::VectorXd> variance;

  int horizon() const { return static_cast<int>(mean.size()); }
};

/// Iterated STCAR forecast: Z_{t'+1} = Z_{t'-1} + 2 G_{t'}, feeding growth
/// means back as history; positions advanced by the frozen velocity field.
/// Future structures reuse W at the last observed positions with the last
/// fitted (rho, sigma).
Forecast forecast_reflectivity(const StcarFit& fit, const ForecastSetup& setup, const VelocityField& velocity,
                               int horizon);

/// Lagrangian persistence: each array keeps Z_{t'} while it moves.
Forecast persistence_baseline(const ForecastSetup& setup, const VelocityField& velocity, int horizon);

/// Forecast raster for step m (1-based): the last scan advected m steps,
/// plus the forecast's per-array increment over persistence spread by
/// Gaussian kernel regression (bandwidth in km, cutoff at 3 bandwidths).
ReflectivityField render_forecast(const ReflectivityField& last_scan, const VelocityField& velocity,
                                  const Forecast& forecast, int m, double bandwidth_km);

/// Marshall-Palmer Z = 200 R^1.6.
double dbz_to_rainrate(double dbz);
double rainrate_to_dbz(double rain_mm_per_hour);

/// Physical floor applied at output time only.
inline double clamp_dbz(double dbz) { return dbz < 0.0 ? 0.0 : dbz; }

}  // namespace nowcast
