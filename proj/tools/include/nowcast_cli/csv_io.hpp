#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/advect.hpp"
#include "nowcast/evaluation.hpp"
#include "nowcast/forecast.hpp"
#include "nowcast/motion.hpp"
#include "nowcast/raster.hpp"

namespace nowcast::cli {

std::string velocity_csv(const VelocityField& field, const ArrayLayout& layout);

/// `array_id,t,x_km,y_km,growth_dbz,valid` for every array and growth time.
std::string growth_csv(std::span<const GrowthField> growth, std::span<const std::vector<Point>> positions);

/// Truth velocities per transition: `t,array_id,x_km,y_km,u_km,v_km`.
std::string truth_velocity_csv(std::span<const std::vector<Point>> velocities, const ArrayLayout& layout);

/// `method,base,timestamp,horizon,array_id,x_km,y_km,dbz,variance`; dBZ floored at 0.
std::string forecast_csv_header();
std::string forecast_csv_rows(const Forecast& forecast);
std::vector<Forecast> parse_forecast_csv(std::string_view text, const std::string& source);

std::string metrics_csv(std::span<const HorizonMetrics> metrics);

}  // namespace nowcast::cli
