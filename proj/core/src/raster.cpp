#include "nowcast/raster.hpp"

#include <cmath>
#include <sstream>

#include "nowcast/error.hpp"
#include "nowcast/text_io.hpp"

namespace nowcast {

namespace {

// Positions within this distance of a pixel center snap onto it.
constexpr double kSnap = 1e-9;

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < kSnap ? r : v;
}

}  // namespace

ReflectivityField::ReflectivityField(GridGeometry geometry, long long timestamp, std::vector<double> values)
    : geometry_(geometry), timestamp_(timestamp), values_(std::move(values)) {
  if (geometry_.width <= 0 || geometry_.height <= 0) throw DataError("raster dimensions must be positive");
  if (!(geometry_.cell_km > 0.0) || !std::isfinite(geometry_.cell_km)) throw DataError("cell size must be > 0");
  const auto expected = static_cast<std::size_t>(geometry_.width) * static_cast<std::size_t>(geometry_.height);
  if (values_.size() != expected) {
    throw DataError("raster has " + std::to_string(values_.size()) + " values, expected " +
                    std::to_string(expected));
  }
  for (double v : values_) {
    if (!is_missing(v) && !std::isfinite(v)) throw DataError("raster contains a non-finite value");
  }
}

ReflectivityField::ReflectivityField(GridGeometry geometry, long long timestamp, double fill)
    : ReflectivityField(geometry, timestamp,
                        std::vector<double>(static_cast<std::size_t>(std::max(geometry.width, 0)) *
                                                static_cast<std::size_t>(std::max(geometry.height, 0)),
                                            fill)) {}

ReflectivityField ReflectivityField::with_timestamp(long long timestamp) const {
  ReflectivityField copy = *this;
  copy.timestamp_ = timestamp;
  return copy;
}

double ReflectivityField::sample(double col, double row) const {
  col = snap(col);
  row = snap(row);
  const double max_col = geometry_.width - 1;
  const double max_row = geometry_.height - 1;
  if (!(col >= 0.0 && row >= 0.0 && col <= max_col && row <= max_row)) return kMissing;

  const int c0 = static_cast<int>(std::floor(col));
  const int r0 = static_cast<int>(std::floor(row));
  const double fc = col - c0;
  const double fr = row - r0;

  double acc = 0.0;
  const int c_hi = fc > 0.0 ? 1 : 0;
  const int r_hi = fr > 0.0 ? 1 : 0;
  for (int dr = 0; dr <= r_hi; ++dr) {
    const double wr = dr == 0 ? 1.0 - fr : fr;
    for (int dc = 0; dc <= c_hi; ++dc) {
      const double wc = dc == 0 ? 1.0 - fc : fc;
      const double v = at(c0 + dc, r0 + dr);
      if (is_missing(v)) return kMissing;
      acc += wr * wc * v;
    }
  }
  return acc;
}

ArrayLayout build_layout(const GridGeometry& grid, int array_size, int spacing) {
  if (array_size < 3 || array_size % 2 == 0) {
    throw ConfigError("array_size must be odd and >= 3 (got " + std::to_string(array_size) + ")");
  }
  if (spacing < 1) throw ConfigError("array spacing must be >= 1");
  if (array_size > grid.width || array_size > grid.height) {
    throw ConfigError("array_size " + std::to_string(array_size) + " exceeds the grid");
  }
  const int half = array_size / 2;

  auto axis = [&](int extent, int& count, int& start) {
    const int available = extent - 1 - 2 * half;
    count = available / spacing + 1;
    start = half + (available - (count - 1) * spacing) / 2;
  };
  int cols = 0, col0 = 0, rows = 0, row0 = 0;
  axis(grid.width, cols, col0);
  axis(grid.height, rows, row0);

  ArrayLayout layout;
  layout.array_size = array_size;
  layout.spacing = spacing;
  layout.grid = grid;
  layout.lattice.rows = rows;
  layout.lattice.cols = cols;
  layout.lattice.origin = grid.to_km(col0, row0);
  layout.lattice.spacing_km = spacing * grid.cell_km;
  layout.centers.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int pc = col0 + c * spacing;
      const int pr = row0 + r * spacing;
      layout.center_cols.push_back(pc);
      layout.center_rows.push_back(pr);
      layout.centers.push_back(grid.to_km(pc, pr));
    }
  }
  return layout;
}

ArrayLayout build_layout(int width, int height, int array_size, int spacing) {
  return build_layout(GridGeometry{width, height, {0.0, 0.0}, 1.0}, array_size, spacing);
}

TrackState start_track(const ArrayLayout& layout) {
  TrackState track;
  track.reference = layout.centers;
  track.positions.push_back(layout.centers);
  return track;
}

Patch extract_patch(const ReflectivityField& field, Point center_km, int array_size) {
  if (array_size < 1 || array_size % 2 == 0) throw ConfigError("patch size must be odd");
  const Point px = field.geometry().to_pixel(center_km);
  const int half = array_size / 2;

  Patch patch;
  patch.size = array_size;
  patch.values.resize(static_cast<std::size_t>(array_size) * static_cast<std::size_t>(array_size));
  std::size_t k = 0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx, ++k) {
      const double col = snap(px.x + dx);
      const double row = snap(px.y + dy);
      if (col < 0.0 || row < 0.0 || col > field.width() - 1 || row > field.height() - 1) {
        patch.values[k] = kMissing;
        ++patch.outside;
        continue;
      }
      const double v = field.sample(col, row);
      if (is_missing(v)) ++patch.missing;
      patch.values[k] = v;
    }
  }
  if (patch.outside == patch.values.size()) {
    throw DataError("patch does not intersect the grid");
  }
  return patch;
}

ReflectivityField parse_field(std::string_view text, const std::string& source) {
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    line = text.substr(pos, end - pos);
    pos = end == text.size() ? end : end + 1;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw DataError(source + ": malformed header (empty file)");
  const auto head = text::split_ws(line);
  if (head.size() != 8 || head[0] != "RADAR" || head[1] != "v1") {
    throw DataError(source + ": malformed header");
  }
  GridGeometry g;
  long long ts = 0;
  try {
    g.width = static_cast<int>(text::parse_int(head[2], "width"));
    g.height = static_cast<int>(text::parse_int(head[3], "height"));
    g.origin.x = text::parse_double(head[4], "x0");
    g.origin.y = text::parse_double(head[5], "y0");
    g.cell_km = text::parse_double(head[6], "cell size");
    ts = text::parse_int(head[7], "timestamp");
  } catch (const DataError& e) {
    throw DataError(source + ": malformed header: " + e.what());
  }
  if (g.width <= 0 || g.height <= 0 || !(g.cell_km > 0.0)) {
    throw DataError(source + ": malformed header: non-positive dimensions or cell size");
  }

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height));
  for (int r = 0; r < g.height; ++r) {
    if (!next_line(line)) throw DataError(source + ": expected " + std::to_string(g.height) + " rows");
    const auto tokens = text::split_ws(line);
    if (tokens.size() != static_cast<std::size_t>(g.width)) {
      throw DataError(source + ": row " + std::to_string(r) + " has " + std::to_string(tokens.size()) +
                      " values, expected " + std::to_string(g.width));
    }
    for (auto tok : tokens) {
      if (tok == "NA" || tok == "NaN" || tok == "nan" || tok == "-nan") {
        values.push_back(kMissing);
      } else {
        const double v = text::parse_double(tok, source);
        if (!std::isfinite(v)) throw DataError(source + ": non-finite value in row " + std::to_string(r));
        values.push_back(v);
      }
    }
  }
  while (next_line(line)) {
    const auto t = text::trim(line);
    if (!t.empty() && t.front() != '#') throw DataError(source + ": unexpected content after grid");
  }
  return ReflectivityField(g, ts, std::move(values));
}

ReflectivityField read_field(const std::filesystem::path& path) {
  return parse_field(text::read_file(path), path.string());
}

std::string format_field(const ReflectivityField& field, std::string_view trailer) {
  const auto& g = field.geometry();
  std::string out;
  out.reserve(static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height) * 6 + 64);
  out += "RADAR v1 " + std::to_string(g.width) + ' ' + std::to_string(g.height) + ' ' +
         text::format_double(g.origin.x) + ' ' + text::format_double(g.origin.y) + ' ' +
         text::format_double(g.cell_km) + ' ' + std::to_string(field.timestamp()) + '\n';
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (c) out += ' ';
      const double v = field.at(c, r);
      out += is_missing(v) ? std::string("NA") : text::format_double(v);
    }
    out += '\n';
  }
  if (!trailer.empty()) {
    out += "# ";
    out += trailer;
    out += '\n';
  }
  return out;
}

void write_field(const ReflectivityField& field, const std::filesystem::path& path, std::string_view trailer) {
  text::write_file_atomic(path, format_field(field, trailer));
}

void validate_sequence(std::span<const ReflectivityField> fields) {
  if (fields.empty()) throw DataError("empty scan sequence");
  const auto& g0 = fields.front().geometry();
  for (std::size_t i = 1; i < fields.size(); ++i) {
    if (!(fields[i].geometry() == g0)) {
      throw DataError("inconsistent dimensions across sequence at scan " + std::to_string(i));
    }
    if (fields[i].timestamp() <= fields[i - 1].timestamp()) throw DataError("non-monotone timestamps");
  }
  if (fields.size() > 2) {
    const long long step = fields[1].timestamp() - fields[0].timestamp();
    for (std::size_t i = 2; i < fields.size(); ++i) {
      if (fields[i].timestamp() - fields[i - 1].timestamp() != step) {
        throw DataError("inconsistent time step at scan " + std::to_string(i));
      }
    }
  }
}

std::vector<ReflectivityField> read_sequence(std::span<const std::filesystem::path> paths) {
  std::vector<ReflectivityField> fields;
  fields.reserve(paths.size());
  for (const auto& p : paths) fields.push_back(read_field(p));
  validate_sequence(fields);
  return fields;
}

}  // namespace nowcast
