#include "nowcast_cli/csv_io.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "nowcast/error.hpp"
#include "nowcast/text_io.hpp"

namespace nowcast::cli {

namespace {

std::string num(double v) { return std::isnan(v) ? "NA" : text::format_double(v); }

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(text::trim(line.substr(start, comma == std::string_view::npos ? line.size() - start : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::string velocity_csv(const VelocityField& field, const ArrayLayout& layout) {
  std::ostringstream o;
  o << "array_id,x_km,y_km,u_raw,v_raw,u_smooth,v_smooth,corr,valid\n";
  for (std::size_t i = 0; i < field.count(); ++i) {
    const Point c = layout.centers[i];
    o << i << ',' << num(c.x) << ',' << num(c.y) << ',' << num(field.raw[i].x) << ',' << num(field.raw[i].y) << ','
      << num(field.smooth[i].x) << ',' << num(field.smooth[i].y) << ',' << num(field.correlation[i]) << ','
      << (field.valid[i] ? 1 : 0) << '\n';
  }
  return o.str();
}

std::string growth_csv(std::span<const GrowthField> growth, std::span<const std::vector<Point>> positions) {
  std::ostringstream o;
  o << "array_id,t,x_km,y_km,growth_dbz,valid\n";
  for (const auto& g : growth) {
    const auto& pos = positions[static_cast<std::size_t>(g.t)];
    for (std::size_t i = 0; i < g.size(); ++i) {
      o << i << ',' << g.t << ',' << num(pos[i].x) << ',' << num(pos[i].y) << ','
        << (g.valid[i] ? num(g.values[i]) : std::string("NA")) << ',' << (g.valid[i] ? 1 : 0) << '\n';
    }
  }
  return o.str();
}

std::string truth_velocity_csv(std::span<const std::vector<Point>> velocities, const ArrayLayout& layout) {
  std::ostringstream o;
  o << "t,array_id,x_km,y_km,u_km,v_km\n";
  for (std::size_t t = 0; t < velocities.size(); ++t) {
    for (std::size_t i = 0; i < velocities[t].size(); ++i) {
      o << t << ',' << i << ',' << num(layout.centers[i].x) << ',' << num(layout.centers[i].y) << ','
        << num(velocities[t][i].x) << ',' << num(velocities[t][i].y) << '\n';
    }
  }
  return o.str();
}

std::string forecast_csv_header() { return "method,base,timestamp,horizon,array_id,x_km,y_km,dbz,variance\n"; }

std::string forecast_csv_rows(const Forecast& f) {
  std::ostringstream o;
  const std::string method = to_string(f.method);
  for (int m = 1; m <= f.horizon(); ++m) {
    const auto s = static_cast<std::size_t>(m - 1);
    for (std::size_t i = 0; i < f.arrays.size(); ++i) {
      const auto e = static_cast<Eigen::Index>(i);
      o << method << ',' << f.base_time << ',' << f.timestamps[s] << ',' << m << ',' << f.arrays[i] << ','
        << num(f.positions[s][i].x) << ',' << num(f.positions[s][i].y) << ',' << num(clamp_dbz(f.mean[s][e])) << ','
        << num(f.variance[s][e]) << '\n';
    }
  }
  return o.str();
}

std::vector<Forecast> parse_forecast_csv(std::string_view text, const std::string& source) {
  std::map<std::pair<std::string, long long>, Forecast> sets;
  std::vector<std::pair<std::string, long long>> order;
  int line_no = 0;
  std::size_t pos = 0;
  bool header = false;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view line =
        text::trim(text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!header) {
      if (line != text::trim(forecast_csv_header())) throw DataError(source + ": not a forecast CSV (bad header)");
      header = true;
      continue;
    }
    const auto cols = split_commas(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (cols.size() != 9) throw DataError(where + ": expected 9 columns");
    const std::string method(cols[0]);
    const long long base = text::parse_int(cols[1], "base");
    const long long ts = text::parse_int(cols[2], "timestamp");
    const long long horizon = text::parse_int(cols[3], "horizon");
    const auto id = static_cast<std::size_t>(text::parse_int(cols[4], "array_id"));
    const Point x{text::parse_double(cols[5], "x_km"), text::parse_double(cols[6], "y_km")};
    const double dbz = text::parse_double(cols[7], "dbz");
    const double var = text::parse_double(cols[8], "variance");
    if (horizon < 1) throw DataError(where + ": horizon must be >= 1");

    const auto key = std::make_pair(method, base);
    auto [it, fresh] = sets.try_emplace(key);
    Forecast& f = it->second;
    if (fresh) {
      order.push_back(key);
      try {
        f.method = parse_method(method);
      } catch (const ConfigError&) {
        throw DataError(where + ": unknown method '" + method + "'");
      }
      f.base_time = base;
    }
    const auto s = static_cast<std::size_t>(horizon - 1);
    if (s == f.mean.size()) {
      f.timestamps.push_back(ts);
      f.positions.emplace_back();
      f.mean.emplace_back();
      f.variance.emplace_back();
    } else if (s + 1 != f.mean.size()) {
      throw DataError(where + ": rows must be grouped by increasing horizon");
    }
    if (f.timestamps[s] != ts) throw DataError(where + ": timestamp changes within a horizon");
    if (s == 0) f.arrays.push_back(id);
    const std::size_t k = f.positions[s].size();
    if (k >= f.arrays.size() || f.arrays[k] != id) throw DataError(where + ": array set differs between horizons");
    f.positions[s].push_back(x);
    auto& mean = f.mean[s];
    auto& variance = f.variance[s];
    mean.conservativeResize(static_cast<Eigen::Index>(k + 1));
    variance.conservativeResize(static_cast<Eigen::Index>(k + 1));
    mean[static_cast<Eigen::Index>(k)] = dbz;
    variance[static_cast<Eigen::Index>(k)] = var;
  }
  if (!header) throw DataError(source + ": empty forecast CSV");
  std::vector<Forecast> out;
  for (const auto& key : order) {
    Forecast& f = sets[key];
    for (const auto& p : f.positions) {
      if (p.size() != f.arrays.size()) throw DataError(source + ": array set differs between horizons");
    }
    f.reference = f.mean.front();
    out.push_back(std::move(f));
  }
  return out;
}

std::string metrics_csv(std::span<const HorizonMetrics> metrics) {
  std::ostringstream o;
  o << "method,horizon,mse,acc_mse,n,mse_thr,acc_mse_thr,n_thr\n";
  for (const auto& m : metrics) {
    o << m.method << ',' << m.horizon << ',' << num(m.mse) << ',' << num(m.acc_mse) << ',' << m.n << ','
      << num(m.mse_thr) << ',' << num(m.acc_mse_thr) << ',' << m.n_thr << '\n';
  }
  return o.str();
}

}  // namespace nowcast::cli
