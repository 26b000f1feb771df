#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "nowcast/raster.hpp"

namespace nowcast::testing {

/// Smooth blobs plus pixel noise on a canvas larger than the view, so shifted
/// crops stay textured everywhere.
class TextureCanvas {
 public:
  TextureCanvas(int width, int height, unsigned seed, double noise = 4.0) : width_(width), height_(height) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    values_.assign(static_cast<std::size_t>(width) * height, 5.0);
    for (int b = 0; b < 25; ++b) {
      const double cx = u(rng) * width, cy = u(rng) * height;
      const double amp = 10.0 + 30.0 * u(rng), s = 3.0 + 8.0 * u(rng);
      for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
          const double d2 = (c - cx) * (c - cx) + (r - cy) * (r - cy);
          values_[static_cast<std::size_t>(r) * width + c] += amp * std::exp(-d2 / (2 * s * s));
        }
      }
    }
    for (double& v : values_) v += noise * (2.0 * u(rng) - 1.0);
  }

  double at(int col, int row) const { return values_[static_cast<std::size_t>(row) * width_ + col]; }

  /// View of size (w, h) whose pixel (0, 0) is canvas pixel (x0, y0).
  ReflectivityField crop(int x0, int y0, int w, int h, long long timestamp, double cell_km = 1.0) const {
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) v[static_cast<std::size_t>(r) * w + c] = at(x0 + c, y0 + r);
    }
    return ReflectivityField(GridGeometry{w, h, {0.0, 0.0}, cell_km}, timestamp, std::move(v));
  }

 private:
  int width_;
  int height_;
  std::vector<double> values_;
};

inline ReflectivityField ramp_field(int w, int h, double a, double b, double c) {
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) v[static_cast<std::size_t>(r) * w + col] = a + b * col + c * r;
  }
  return ReflectivityField(GridGeometry{w, h, {0.0, 0.0}, 1.0}, 0, std::move(v));
}

}  // namespace nowcast::testing
