#pragma once

#include <span>
#include <vector>

#include "nowcast/geometry.hpp"
#include "nowcast/raster.hpp"

namespace nowcast {

/// Per-array scalar reflectivity (patch mean) at one time.
struct ArraySample {
  std::vector<double> values;
  std::vector<bool> valid;

  std::size_t size() const { return values.size(); }
};

/// Growth/decay per array at interior time t (dBZ per step).
struct GrowthField {
  int t = 0;
  std::vector<double> values;
  std::vector<bool> valid;

  std::size_t size() const { return values.size(); }
};

/// Patch mean around each position. An array is invalid when any footprint
/// cell lies off the grid or when missing cells reach 20% of the patch;
/// below that, missing cells count as 0 dBZ.
ArraySample sample_reflectivity(const ReflectivityField& field, std::span<const Point> positions, int array_size);

/// Centered-difference growth along trajectories: (Z_next - Z_prev) / 2.
GrowthField growth_from_scans(const ArraySample& prev, const ArraySample& next, int t);

/// Z_{t+1} = Z_{t-1} + 2 G_t along trajectories.
ArraySample advance_reflectivity(const ArraySample& prev, const GrowthField& growth);

}  // namespace nowcast
