#pragma once

#include <cmath>

namespace nowcast {

/// A point or displacement in the flat map plane, in km.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Point a, Point b) = default;
};

inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double squared_norm(Point p) { return p.x * p.x + p.y * p.y; }

/// Pixel grid placement: pixel (col,row) has its center at origin + (col,row)*cell_km.
struct GridGeometry {
  int width = 0;
  int height = 0;
  Point origin{};
  double cell_km = 1.0;

  Point to_km(double col, double row) const {
    return {origin.x + col * cell_km, origin.y + row * cell_km};
  }
  Point to_pixel(Point km) const {
    return {(km.x - origin.x) / cell_km, (km.y - origin.y) / cell_km};
  }
  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Regular lattice of array centers (row-major: index = row * cols + col).
struct LatticeGeometry {
  int rows = 0;
  int cols = 0;
  Point origin{};  // center of array 0, km
  double spacing_km = 1.0;

  std::size_t count() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(col);
  }
  Point center(int row, int col) const {
    return {origin.x + col * spacing_km, origin.y + row * spacing_km};
  }
};

}  // namespace nowcast
