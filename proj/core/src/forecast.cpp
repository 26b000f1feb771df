#include "nowcast/forecast.hpp"

#include <algorithm>
#include <cmath>

#include "nowcast/error.hpp"

namespace nowcast {

std::string to_string(ForecastMethod method) {
  return method == ForecastMethod::Stcar ? "stcar" : "persistence";
}

ForecastMethod parse_method(const std::string& text) {
  if (text == "stcar") return ForecastMethod::Stcar;
  if (text == "persistence") return ForecastMethod::Persistence;
  throw ConfigError("unknown forecast method '" + text + "'");
}

namespace {

// B^{-1} v = (W_D - rho W)^{-1} W_D v.
Eigen::VectorXd apply_b_inverse(const PrecisionFactor& factor, const CarStructure& car, const Eigen::VectorXd& v) {
  return factor.solve(car.row_sums.cwiseProduct(v));
}

std::vector<Point> step_positions(const std::vector<Point>& x, const VelocityField& velocity) {
  std::vector<Point> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + velocity.at(x[i]);
  return out;
}

void check_setup(const ForecastSetup& setup, int horizon) {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  const auto n = setup.arrays.size();
  if (setup.last_positions.size() != n || setup.prev_positions.size() != n ||
      static_cast<std::size_t>(setup.z_last.size()) != n || static_cast<std::size_t>(setup.z_prev.size()) != n) {
    throw DataError("forecast setup arrays differ in length");
  }
}

Forecast start(ForecastMethod method, const ForecastSetup& setup) {
  Forecast f;
  f.method = method;
  f.base_time = setup.base_time;
  f.arrays = setup.arrays;
  f.reference = setup.z_last;
  return f;
}

}  // namespace

Eigen::VectorXd predict_growth(std::span<const double> r, const CarStructure& car, double rho,
                               std::span<const GrowthState> history) {
  const auto n = static_cast<Eigen::Index>(car.size());
  if (history.size() < r.size()) throw DataError("missing history: predict_growth needs q past growth fields");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  for (std::size_t j = 1; j <= r.size(); ++j) {
    const auto& h = history[history.size() - j];
    if (h.growth.size() != n || static_cast<Eigen::Index>(h.car.size()) != n) {
      throw DataError("predict_growth: history length mismatch");
    }
    acc += r[j - 1] * h.car.apply_b(h.rho, h.growth);
  }
  PrecisionFactor factor(car);
  if (!factor.factorize(rho)) throw NumericalError("predict_growth: B is singular at the fitted rho");
  return apply_b_inverse(factor, car, acc);
}

Forecast forecast_reflectivity(const StcarFit& fit, const ForecastSetup& setup, const VelocityField& velocity,
                               int horizon) {
  check_setup(setup, horizon);
  if (fit.times.empty()) throw DataError("forecast: fit has no time blocks");
  const std::size_t q = fit.q();
  if (fit.times.size() < q) throw DataError("missing history: fit holds fewer growth times than q");
  if (fit.arrays != setup.arrays) throw DataError("forecast: array set differs from the fitted set");

  const TimeFit& last = fit.times.back();
  const CarStructure future = build_weights(fit.neighborhood, setup.last_positions, fit.phi);
  PrecisionFactor factor(future);
  if (!factor.factorize(last.rho)) throw NumericalError("forecast: B is singular at the fitted rho");

  // Transformed history u = B G, oldest first.
  std::vector<Eigen::VectorXd> u;
  for (std::size_t k = fit.times.size() - q; k < fit.times.size(); ++k) {
    const auto& tf = fit.times[k];
    u.push_back(tf.car.apply_b(tf.rho, tf.growth));
  }

  Forecast out = start(ForecastMethod::Stcar, setup);
  const Eigen::VectorXd qinv_diag = factor.inverse_diagonal();
  const double s2 = last.sigma * last.sigma;

  // psi weights of the AR recursion on u.
  std::vector<double> psi(static_cast<std::size_t>(horizon), 0.0);
  psi[0] = 1.0;
  for (std::size_t l = 1; l < psi.size(); ++l) {
    for (std::size_t j = 1; j <= q && j <= l; ++j) psi[l] += fit.r[j - 1] * psi[l - j];
  }

  std::vector<Eigen::VectorXd> z{setup.z_prev, setup.z_last};
  std::vector<Point> x = setup.last_positions;
  for (int m = 1; m <= horizon; ++m) {
    Eigen::VectorXd next_u = Eigen::VectorXd::Zero(setup.z_last.size());
    for (std::size_t j = 1; j <= q; ++j) next_u += fit.r[j - 1] * u[u.size() - j];
    u.push_back(next_u);
    const Eigen::VectorXd g = apply_b_inverse(factor, future, next_u);

    z.push_back(z[z.size() - 2] + 2.0 * g);
    x = step_positions(x, velocity);

    // Z_{t'+m} sums future growth at steps m-1, m-3, ... (0-based l).
    double coef = 0.0;
    for (int k = 0; k < m; ++k) {
      double c = 0.0;
      for (int l = m - 1; l >= k; l -= 2) c += psi[static_cast<std::size_t>(l - k)];
      coef += c * c;
    }
    out.mean.push_back(z.back());
    out.variance.push_back(4.0 * coef * s2 * qinv_diag);
    out.positions.push_back(x);
    out.timestamps.push_back(setup.base_time + m * setup.time_step);
  }
  return out;
}

Forecast persistence_baseline(const ForecastSetup& setup, const VelocityField& velocity, int horizon) {
  check_setup(setup, horizon);
  Forecast out = start(ForecastMethod::Persistence, setup);
  std::vector<Point> x = setup.last_positions;
  for (int m = 1; m <= horizon; ++m) {
    x = step_positions(x, velocity);
    out.mean.push_back(setup.z_last);
    out.variance.push_back(Eigen::VectorXd::Zero(setup.z_last.size()));
    out.positions.push_back(x);
    out.timestamps.push_back(setup.base_time + m * setup.time_step);
  }
  return out;
}

ReflectivityField render_forecast(const ReflectivityField& last_scan, const VelocityField& velocity,
                                  const Forecast& forecast, int m, double bandwidth_km) {
  if (m < 1 || m > forecast.horizon()) throw DataError("render_forecast: step outside the forecast horizon");
  if (!(bandwidth_km > 0.0)) throw ConfigError("render bandwidth must be > 0");
  const GridGeometry& grid = last_scan.geometry();
  const auto step = static_cast<std::size_t>(m - 1);
  const Eigen::VectorXd increment = forecast.mean[step] - forecast.reference;
  const bool flat = increment.cwiseAbs().maxCoeff() == 0.0;
  const auto& pos = forecast.positions[step];
  const double cutoff2 = 9.0 * bandwidth_km * bandwidth_km;

  std::vector<double> values(static_cast<std::size_t>(grid.width) * static_cast<std::size_t>(grid.height));
  for (int row = 0; row < grid.height; ++row) {
    for (int col = 0; col < grid.width; ++col) {
      const Point p = grid.to_km(col, row);
      const Point src = grid.to_pixel(back_trace(p, velocity, m));
      double v = last_scan.sample(src.x, src.y);
      if (!is_missing(v) && !flat) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < pos.size(); ++i) {
          const double d2 = squared_norm(pos[i] - p);
          if (d2 > cutoff2) continue;
          const double w = std::exp(-d2 / (2.0 * bandwidth_km * bandwidth_km));
          num += w * increment[static_cast<Eigen::Index>(i)];
          den += w;
        }
        if (den > 0.0) v += num / den;
      }
      values[static_cast<std::size_t>(row) * static_cast<std::size_t>(grid.width) + static_cast<std::size_t>(col)] = v;
    }
  }
  return ReflectivityField(grid, forecast.timestamps[step], std::move(values));
}

double dbz_to_rainrate(double dbz) {
  if (!std::isfinite(dbz)) throw DataError("dbz_to_rainrate: non-finite dBZ");
  const double z = std::pow(10.0, dbz / 10.0);
  return std::pow(z / 200.0, 1.0 / 1.6);
}

double rainrate_to_dbz(double rain_mm_per_hour) {
  if (!(rain_mm_per_hour > 0.0) || !std::isfinite(rain_mm_per_hour)) {
    throw DataError("rainrate_to_dbz: rain rate must be finite and > 0");
  }
  return 10.0 * std::log10(200.0 * std::pow(rain_mm_per_hour, 1.6));
}

}  // namespace nowcast
