#include "nowcast/evaluation.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "nowcast/advect.hpp"
#include "nowcast/error.hpp"

namespace nowcast {

std::vector<double> accumulate_mse(std::span<const double> per_horizon) {
  std::vector<double> out;
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : per_horizon) {
    if (!std::isnan(v)) {
      sum += v;
      ++count;
    }
    out.push_back(count > 0 ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

std::vector<HorizonMetrics> evaluate_forecasts(std::span<const Forecast> forecasts,
                                               std::span<const ReflectivityField> truth, int array_size,
                                               double threshold_dbz) {
  if (forecasts.empty()) throw DataError("evaluate: no forecasts");
  const int horizon = forecasts.front().horizon();
  for (const auto& f : forecasts) {
    if (f.horizon() != horizon) throw DataError("evaluate: horizon mismatch between forecast sets");
  }
  std::map<long long, const ReflectivityField*> scans;
  for (const auto& s : truth) scans[s.timestamp()] = &s;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> mse(forecasts.size()), mse_thr(forecasts.size());
  std::vector<std::vector<std::size_t>> count(forecasts.size()), count_thr(forecasts.size());

  for (int m = 1; m <= horizon; ++m) {
    const auto step = static_cast<std::size_t>(m - 1);
    // observed[k][array id] for every forecast set.
    std::vector<std::map<std::size_t, std::pair<double, double>>> scored(forecasts.size());
    for (std::size_t k = 0; k < forecasts.size(); ++k) {
      const auto& f = forecasts[k];
      if (f.timestamps[step] != forecasts.front().timestamps[step]) {
        throw DataError("evaluate: horizon mismatch (timestamps differ between forecast sets)");
      }
      const auto it = scans.find(f.timestamps[step]);
      if (it == scans.end()) {
        throw DataError("evaluate: no truth scan for timestamp " + std::to_string(f.timestamps[step]));
      }
      const ArraySample obs = sample_reflectivity(*it->second, f.positions[step], array_size);
      for (std::size_t i = 0; i < f.arrays.size(); ++i) {
        if (obs.valid[i]) scored[k][f.arrays[i]] = {clamp_dbz(f.mean[step][static_cast<Eigen::Index>(i)]), obs.values[i]};
      }
    }
    for (std::size_t k = 0; k < forecasts.size(); ++k) {
      double sum = 0.0, sum_thr = 0.0;
      std::size_t n = 0, n_thr = 0;
      for (const auto& [id, pv] : scored[k]) {
        bool everywhere = true;
        for (const auto& other : scored) everywhere = everywhere && other.count(id) > 0;
        if (!everywhere) continue;
        const double e = pv.first - pv.second;
        sum += e * e;
        ++n;
        if (pv.second > threshold_dbz) {
          sum_thr += e * e;
          ++n_thr;
        }
      }
      mse[k].push_back(n > 0 ? sum / static_cast<double>(n) : nan);
      mse_thr[k].push_back(n_thr > 0 ? sum_thr / static_cast<double>(n_thr) : nan);
      count[k].push_back(n);
      count_thr[k].push_back(n_thr);
    }
  }

  std::vector<HorizonMetrics> out;
  for (std::size_t k = 0; k < forecasts.size(); ++k) {
    const auto acc = accumulate_mse(mse[k]);
    const auto acc_thr = accumulate_mse(mse_thr[k]);
    for (int m = 1; m <= horizon; ++m) {
      const auto s = static_cast<std::size_t>(m - 1);
      out.push_back({to_string(forecasts[k].method), m, mse[k][s], acc[s], count[k][s], mse_thr[k][s], acc_thr[s],
                     count_thr[k][s]});
    }
  }
  return out;
}

}  // namespace nowcast
