#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nowcast/geometry.hpp"

namespace nowcast {

/// No-echo / missing marker for reflectivity cells.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return v != v; }

/// Fraction of missing cells at or above which a patch is low quality.
inline constexpr double kMaxMissingFraction = 0.2;

/// One timestamped scan of reflectivity (dBZ) on a regular pixel grid.
/// Immutable after construction.
class ReflectivityField {
 public:
  ReflectivityField() = default;
  ReflectivityField(GridGeometry geometry, long long timestamp, std::vector<double> values);
  ReflectivityField(GridGeometry geometry, long long timestamp, double fill);

  const GridGeometry& geometry() const { return geometry_; }
  int width() const { return geometry_.width; }
  int height() const { return geometry_.height; }
  double cell_size() const { return geometry_.cell_km; }
  Point origin() const { return geometry_.origin; }
  long long timestamp() const { return timestamp_; }
  std::span<const double> values() const { return values_; }

  double at(int col, int row) const {
    return values_[static_cast<std::size_t>(row) * static_cast<std::size_t>(geometry_.width) +
                   static_cast<std::size_t>(col)];
  }
  bool contains(int col, int row) const {
    return col >= 0 && row >= 0 && col < geometry_.width && row < geometry_.height;
  }

  /// Bilinear sample at fractional pixel coordinates. Returns kMissing outside
  /// the grid or when a neighbour carrying nonzero weight is missing.
  double sample(double col, double row) const;

  /// Copy with a different timestamp (forecast products).
  ReflectivityField with_timestamp(long long timestamp) const;

 private:
  GridGeometry geometry_{};
  long long timestamp_ = 0;
  std::vector<double> values_;
};

/// Pixel-array tiling of the grid: a centered regular lattice of square arrays.
struct ArrayLayout {
  int array_size = 0;
  int spacing = 0;
  GridGeometry grid{};
  LatticeGeometry lattice{};
  std::vector<Point> centers;       // km
  std::vector<int> center_cols;     // pixel indices
  std::vector<int> center_rows;

  std::size_t count() const { return centers.size(); }
};

/// Maximal centered lattice of array centers whose footprints fit the grid.
ArrayLayout build_layout(const GridGeometry& grid, int array_size, int spacing);
/// Convenience overload on a unit-cell grid at the origin.
ArrayLayout build_layout(int width, int height, int array_size, int spacing);

/// Array-center positions x_{i,t} over a contiguous run of times.
struct TrackState {
  std::vector<Point> reference;                 // s_i
  std::vector<std::vector<Point>> positions;    // positions[k][i]

  std::size_t times() const { return positions.size(); }
  std::size_t arrays() const { return reference.size(); }
  const std::vector<Point>& at(std::size_t k) const { return positions.at(k); }
  const std::vector<Point>& latest() const { return positions.back(); }
};

TrackState start_track(const ArrayLayout& layout);

/// array_size x array_size samples around a center (row-major, dy outer).
struct Patch {
  int size = 0;
  std::vector<double> values;   // kMissing where missing or outside
  std::size_t missing = 0;      // missing cells inside the grid
  std::size_t outside = 0;      // cells off the grid

  double missing_fraction() const {
    return static_cast<double>(missing + outside) / static_cast<double>(values.size());
  }
};

/// Bilinear patch extraction; throws DataError when no cell intersects the grid.
Patch extract_patch(const ReflectivityField& field, Point center_km, int array_size);

/// Text raster format: `RADAR v1 <w> <h> <x0> <y0> <cell> <timestamp>` then
/// h rows of w values, `NA` for missing; trailing `#` lines are ignored.
ReflectivityField read_field(const std::filesystem::path& path);
ReflectivityField parse_field(std::string_view text, const std::string& source = "<memory>");
std::string format_field(const ReflectivityField& field, std::string_view trailer = {});
void write_field(const ReflectivityField& field, const std::filesystem::path& path,
                 std::string_view trailer = {});

/// Reads and validates a sequence: equal geometry, strictly increasing
/// timestamps with a constant step.
std::vector<ReflectivityField> read_sequence(std::span<const std::filesystem::path> paths);
void validate_sequence(std::span<const ReflectivityField> fields);

}  // namespace nowcast
