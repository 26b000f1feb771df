#include "nowcast/advect.hpp"

#include <cmath>

#include "nowcast/error.hpp"

namespace nowcast {

namespace {
constexpr double kSnap = 1e-9;

bool near_integer(double v) { return std::abs(v - std::round(v)) < kSnap; }
}  // namespace

ArraySample sample_reflectivity(const ReflectivityField& field, std::span<const Point> positions, int array_size) {
  if (array_size < 1 || array_size % 2 == 0) throw ConfigError("array_size must be odd");
  const int half = array_size / 2;
  const double cells = static_cast<double>(array_size) * array_size;
  const auto max_missing = static_cast<std::size_t>(kMaxMissingFraction * cells);
  const auto& g = field.geometry();

  ArraySample out;
  out.values.assign(positions.size(), 0.0);
  out.valid.assign(positions.size(), false);

  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Point px = g.to_pixel(positions[i]);
    const double lo_c = px.x - half, hi_c = px.x + half;
    const double lo_r = px.y - half, hi_r = px.y + half;
    if (lo_c < -kSnap || lo_r < -kSnap || hi_c > g.width - 1 + kSnap || hi_r > g.height - 1 + kSnap) continue;

    double sum = 0.0;
    std::size_t missing = 0;
    if (near_integer(px.x) && near_integer(px.y)) {
      const int pc = static_cast<int>(std::round(px.x));
      const int pr = static_cast<int>(std::round(px.y));
      for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
          const double v = field.at(pc + dx, pr + dy);
          if (is_missing(v)) ++missing;
          else sum += v;
        }
      }
    } else {
      for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
          const double v = field.sample(px.x + dx, px.y + dy);
          if (is_missing(v)) ++missing;
          else sum += v;
        }
      }
    }
    if (missing > max_missing) continue;
    out.values[i] = sum / cells;
    out.valid[i] = true;
  }
  return out;
}

GrowthField growth_from_scans(const ArraySample& prev, const ArraySample& next, int t) {
  if (prev.size() != next.size()) throw DataError("growth_from_scans: length mismatch");
  GrowthField g;
  g.t = t;
  g.values.assign(prev.size(), 0.0);
  g.valid.assign(prev.size(), false);
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (!prev.valid[i] || !next.valid[i]) continue;
    g.values[i] = (next.values[i] - prev.values[i]) / 2.0;
    g.valid[i] = true;
  }
  return g;
}

ArraySample advance_reflectivity(const ArraySample& prev, const GrowthField& growth) {
  if (prev.size() != growth.size()) throw DataError("advance_reflectivity: length mismatch");
  ArraySample out;
  out.values.assign(prev.size(), 0.0);
  out.valid.assign(prev.size(), false);
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (!prev.valid[i] || !growth.valid[i]) continue;
    out.values[i] = prev.values[i] + 2.0 * growth.values[i];
    out.valid[i] = true;
  }
  return out;
}

}  // namespace nowcast
