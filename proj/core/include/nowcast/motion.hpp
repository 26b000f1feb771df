#pragma once

#include <span>
#include <vector>

#include "nowcast/geometry.hpp"
#include "nowcast/raster.hpp"

namespace nowcast {

struct MotionConfig {
  int search_radius = 5;               // pixels
  double min_valid_correlation = 0.3;  // in [-1, 1]
  double min_patch_variance = 1.0;     // dBZ^2
  double lambda = 1.0;                 // divergence penalty weight, lattice units
  int max_iterations = 10000;          // CG iterations for the smoothing solve
  double tolerance = 1e-10;            // CG relative residual

  void validate() const;
};

/// Per-array motion vectors on the layout lattice, km per time step.
struct VelocityField {
  LatticeGeometry lattice{};
  std::vector<Point> raw;
  std::vector<Point> smooth;
  std::vector<double> correlation;  // best Pearson r; NaN when no candidate
  std::vector<bool> valid;

  std::size_t count() const { return raw.size(); }
  /// Smoothed velocity at an arbitrary position: bilinear on the lattice,
  /// constant extension beyond its edges.
  Point at(Point x) const;
};

/// Uniform field (testing and synthetic use).
VelocityField uniform_velocity(const LatticeGeometry& lattice, Point v);

/// Tracking by correlation: exhaustive integer-lag search maximizing Pearson r.
VelocityField trec(const ReflectivityField& scan_t, const ReflectivityField& scan_t1, const ArrayLayout& layout,
                   const MotionConfig& cfg);

/// Variational smoothing under the mass-continuity penalty. Invalid arrays are
/// first filled harmonically from valid neighbours.
VelocityField smooth_velocity(const VelocityField& raw, const MotionConfig& cfg);

/// Sum over lattice nodes of (du/dx + dv/dy)^2 with central differences
/// (one-sided on the boundary), in lattice units.
double divergence_penalty(std::span<const Point> field, int rows, int cols);

/// Forward (m = +1) or inverse (m = -1) translation of the latest positions.
/// Forward appends x_{t+1} = x_t + v(x_t); inverse drops the latest time,
/// returning x_t = x_{t+1} - v(x_t).
TrackState translate(const TrackState& track, const VelocityField& field, int m);

/// Semi-Lagrangian departure point: solves y + v(y) = x, repeated `steps` times.
Point back_trace(Point x, const VelocityField& field, int steps);

}  // namespace nowcast
