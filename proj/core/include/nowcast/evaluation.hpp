#pragma once

#include <span>
#include <string>
#include <vector>

#include "nowcast/forecast.hpp"
#include "nowcast/raster.hpp"

namespace nowcast {

struct HorizonMetrics {
  std::string method;
  int horizon = 0;
  double mse = 0.0;
  double acc_mse = 0.0;  // running mean of per-horizon MSE through this horizon
  std::size_t n = 0;
  double mse_thr = 0.0;  // arrays whose observed reflectivity exceeds the threshold
  double acc_mse_thr = 0.0;
  std::size_t n_thr = 0;
};

/// Scores each forecast against the truth scan sharing its timestamp. Truth
/// is the patch mean at the forecast positions; forecasts are floored at
/// 0 dBZ. Per horizon, only arrays scoreable for every method count.
std::vector<HorizonMetrics> evaluate_forecasts(std::span<const Forecast> forecasts,
                                               std::span<const ReflectivityField> truth, int array_size,
                                               double threshold_dbz);

/// Running mean of per-horizon values, skipping horizons without data (NaN).
std::vector<double> accumulate_mse(std::span<const double> per_horizon);

}  // namespace nowcast
