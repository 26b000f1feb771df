#include "nowcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "nowcast/error.hpp"
#include "nowcast/stcar.hpp"
#include "nowcast/text_io.hpp"

namespace nowcast {

namespace {

Point grid_center(const SceneSpec& spec) { return {0.5 * (spec.width - 1), 0.5 * (spec.height - 1)}; }

Point rotate(Point p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

// Dense canvas in material pixel coordinates.
struct Canvas {
  int width = 0;
  int height = 0;
  int offset_x = 0;  // material = canvas + offset
  int offset_y = 0;
  std::vector<double> values;

  double& at(int col, int row) { return values[static_cast<std::size_t>(row) * width + col]; }
  double at(int col, int row) const { return values[static_cast<std::size_t>(row) * width + col]; }

  double sample(Point material) const {
    double x = material.x - offset_x;
    double y = material.y - offset_y;
    const double rx = std::round(x), ry = std::round(y);
    if (std::abs(x - rx) < 1e-9) x = rx;
    if (std::abs(y - ry) < 1e-9) y = ry;
    if (x < 0 || y < 0 || x > width - 1 || y > height - 1) throw Error("synthetic canvas too small");
    const int x0 = std::min(static_cast<int>(std::floor(x)), width - 1);
    const int y0 = std::min(static_cast<int>(std::floor(y)), height - 1);
    const double fx = x - x0, fy = y - y0;
    const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
    double v = (1 - fx) * (1 - fy) * at(x0, y0);
    if (fx > 0) v += fx * (1 - fy) * at(x1, y0);
    if (fy > 0) v += (1 - fx) * fy * at(x0, y1);
    if (fx > 0 && fy > 0) v += fx * fy * at(x1, y1);
    return v;
  }
};

MotionKind parse_motion(const std::string& v) {
  if (v == "uniform") return MotionKind::Uniform;
  if (v == "rotational") return MotionKind::Rotational;
  if (v == "divergent") return MotionKind::Divergent;
  throw ConfigError("motion: unknown kind '" + v + "'");
}

GrowthKind parse_growth(const std::string& v) {
  if (v == "zero") return GrowthKind::Zero;
  if (v == "constant") return GrowthKind::Constant;
  if (v == "stcar") return GrowthKind::Stcar;
  throw ConfigError("growth: unknown kind '" + v + "'");
}

const char* motion_name(MotionKind k) {
  switch (k) {
    case MotionKind::Uniform: return "uniform";
    case MotionKind::Rotational: return "rotational";
    case MotionKind::Divergent: return "divergent";
  }
  return "uniform";
}

const char* growth_name(GrowthKind k) {
  switch (k) {
    case GrowthKind::Zero: return "zero";
    case GrowthKind::Constant: return "constant";
    case GrowthKind::Stcar: return "stcar";
  }
  return "zero";
}

double max_step_component(const SceneSpec& spec) {
  const Point c = grid_center(spec);
  double worst = 0.0;
  for (Point corner : {Point{0, 0}, Point{double(spec.width - 1), 0}, Point{0, double(spec.height - 1)},
                       Point{double(spec.width - 1), double(spec.height - 1)}}) {
    Point d{};
    if (spec.motion == MotionKind::Rotational) d = rotate(corner - c, spec.omega) - (corner - c);
    if (spec.motion == MotionKind::Divergent) d = spec.alpha * (corner - c);
    worst = std::max({worst, std::abs(d.x), std::abs(d.y)});
  }
  if (spec.motion == MotionKind::Uniform) worst = std::max(std::abs(spec.velocity.x), std::abs(spec.velocity.y));
  return worst;
}

}  // namespace

void SceneSpec::validate() const {
  if (width < 3 || height < 3) throw ConfigError("width/height must be >= 3");
  if (!(cell_km > 0.0)) throw ConfigError("cell_km must be > 0");
  if (steps < 2) throw ConfigError("steps must be >= 2");
  if (time_step < 1) throw ConfigError("time_step must be >= 1");
  if (motion == MotionKind::Divergent && !(1.0 + alpha > 0.0)) throw ConfigError("alpha must be > -1");
  if (search_radius < 1) throw ConfigError("search_radius must be >= 1");
  if (max_step_component(*this) > search_radius + 1e-12) {
    throw ConfigError("velocity: motion per step exceeds search_radius");
  }
  if (blobs < 0) throw ConfigError("blobs must be >= 0");
  if (!(blob_amplitude_min >= 0.0) || !(blob_amplitude_max >= blob_amplitude_min)) {
    throw ConfigError("blob_amplitude: need 0 <= min <= max");
  }
  if (!(blob_sigma_min > 0.0) || !(blob_sigma_max >= blob_sigma_min)) {
    throw ConfigError("blob_sigma: need 0 < min <= max");
  }
  if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
  if (array_size < 3 || array_size % 2 == 0) throw ConfigError("array_size must be odd and >= 3");
  if (spacing < 1) throw ConfigError("spacing must be >= 1");
  if (growth == GrowthKind::Stcar) {
    if (kernels < 1) throw ConfigError("kernels must be >= 1");
    if (!(bandwidth_km > 0.0)) throw ConfigError("bandwidth_km must be > 0");
    if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
    if (r.empty()) throw ConfigError("r must hold at least one coefficient");
    if (burn_in < 0) throw ConfigError("burn_in must be >= 0");
  }
}

SceneSpec parse_scene_spec(std::string_view text, const std::string& source) {
  SceneSpec s;
  for (const auto& kv : text::parse_key_values(text, source, true)) {
    const auto& k = kv.key;
    const auto& v = kv.value;
    auto num = [&] {
      try {
        return text::parse_double(v, k);
      } catch (const DataError& e) {
        throw ConfigError(std::string(e.what()));
      }
    };
    auto integer = [&] {
      try {
        return text::parse_int(v, k);
      } catch (const DataError& e) {
        throw ConfigError(std::string(e.what()));
      }
    };
    if (k == "width") s.width = static_cast<int>(integer());
    else if (k == "height") s.height = static_cast<int>(integer());
    else if (k == "cell_km") s.cell_km = num();
    else if (k == "origin_x") s.origin.x = num();
    else if (k == "origin_y") s.origin.y = num();
    else if (k == "steps") s.steps = static_cast<int>(integer());
    else if (k == "timestamp0") s.timestamp0 = integer();
    else if (k == "time_step") s.time_step = integer();
    else if (k == "motion") s.motion = parse_motion(v);
    else if (k == "velocity_x") s.velocity.x = num();
    else if (k == "velocity_y") s.velocity.y = num();
    else if (k == "omega") s.omega = num();
    else if (k == "alpha") s.alpha = num();
    else if (k == "background") s.background = num();
    else if (k == "blobs") s.blobs = static_cast<int>(integer());
    else if (k == "blob_amplitude_min") s.blob_amplitude_min = num();
    else if (k == "blob_amplitude_max") s.blob_amplitude_max = num();
    else if (k == "blob_sigma_min") s.blob_sigma_min = num();
    else if (k == "blob_sigma_max") s.blob_sigma_max = num();
    else if (k == "noise") s.noise = num();
    else if (k == "growth") s.growth = parse_growth(v);
    else if (k == "growth_rate") s.growth_rate = num();
    else if (k == "array_size") s.array_size = static_cast<int>(integer());
    else if (k == "spacing") s.spacing = static_cast<int>(integer());
    else if (k == "kernels") s.kernels = static_cast<int>(integer());
    else if (k == "bandwidth_km") s.bandwidth_km = num();
    else if (k == "gamma_scale") s.gamma_scale = num();
    else if (k == "rho") s.rho = num();
    else if (k == "sigma") s.sigma = num();
    else if (k == "r") {
      try {
        s.r = text::parse_double_list(v, k);
      } catch (const DataError& e) {
        throw ConfigError(std::string(e.what()));
      }
    } else if (k == "burn_in") s.burn_in = static_cast<int>(integer());
    else if (k == "search_radius") s.search_radius = static_cast<int>(integer());
    else if (k == "seed") s.seed = static_cast<std::uint64_t>(integer());
    else throw ConfigError("unknown key '" + k + "' in " + source);
  }
  s.validate();
  return s;
}

std::string format_scene_spec(const SceneSpec& s) {
  using text::format_double;
  std::ostringstream o;
  o << "width = " << s.width << "\nheight = " << s.height << "\ncell_km = " << format_double(s.cell_km)
    << "\norigin_x = " << format_double(s.origin.x) << "\norigin_y = " << format_double(s.origin.y)
    << "\nsteps = " << s.steps << "\ntimestamp0 = " << s.timestamp0 << "\ntime_step = " << s.time_step
    << "\nmotion = " << motion_name(s.motion) << "\nvelocity_x = " << format_double(s.velocity.x)
    << "\nvelocity_y = " << format_double(s.velocity.y) << "\nomega = " << format_double(s.omega)
    << "\nalpha = " << format_double(s.alpha) << "\nbackground = " << format_double(s.background)
    << "\nblobs = " << s.blobs << "\nblob_amplitude_min = " << format_double(s.blob_amplitude_min)
    << "\nblob_amplitude_max = " << format_double(s.blob_amplitude_max)
    << "\nblob_sigma_min = " << format_double(s.blob_sigma_min)
    << "\nblob_sigma_max = " << format_double(s.blob_sigma_max) << "\nnoise = " << format_double(s.noise)
    << "\ngrowth = " << growth_name(s.growth) << "\ngrowth_rate = " << format_double(s.growth_rate)
    << "\narray_size = " << s.array_size << "\nspacing = " << s.spacing << "\nkernels = " << s.kernels
    << "\nbandwidth_km = " << format_double(s.bandwidth_km) << "\ngamma_scale = " << format_double(s.gamma_scale)
    << "\nrho = " << format_double(s.rho) << "\nsigma = " << format_double(s.sigma) << "\nr =";
  for (double v : s.r) o << ' ' << format_double(v);
  o << "\nburn_in = " << s.burn_in << "\nsearch_radius = " << s.search_radius << "\nseed = " << s.seed << '\n';
  return o.str();
}

Point motion_forward(const SceneSpec& spec, Point material_px, double t) {
  const Point c = grid_center(spec);
  switch (spec.motion) {
    case MotionKind::Uniform: return material_px + t * spec.velocity;
    case MotionKind::Rotational: return c + rotate(material_px - c, spec.omega * t);
    case MotionKind::Divergent: return c + std::pow(1.0 + spec.alpha, t) * (material_px - c);
  }
  return material_px;
}

Point motion_inverse(const SceneSpec& spec, Point frame_px, double t) {
  const Point c = grid_center(spec);
  switch (spec.motion) {
    case MotionKind::Uniform: return frame_px - t * spec.velocity;
    case MotionKind::Rotational: return c + rotate(frame_px - c, -spec.omega * t);
    case MotionKind::Divergent: return c + std::pow(1.0 + spec.alpha, -t) * (frame_px - c);
  }
  return frame_px;
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  const GridGeometry grid{spec.width, spec.height, spec.origin, spec.cell_km};
  Scene scene;
  SceneTruth& truth = scene.truth;
  truth.layout = build_layout(grid, spec.array_size, spec.spacing);
  const ArrayLayout& layout = truth.layout;
  const std::size_t n = layout.count();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Canvas bounds: every material point seen by any frame, plus a patch margin.
  double minx = std::numeric_limits<double>::infinity(), miny = minx;
  double maxx = -minx, maxy = -minx;
  for (int t = 0; t < spec.steps; ++t) {
    for (Point corner : {Point{0, 0}, Point{double(spec.width - 1), 0}, Point{0, double(spec.height - 1)},
                         Point{double(spec.width - 1), double(spec.height - 1)}}) {
      const Point m = motion_inverse(spec, corner, t);
      minx = std::min(minx, m.x);
      miny = std::min(miny, m.y);
      maxx = std::max(maxx, m.x);
      maxy = std::max(maxy, m.y);
    }
  }
  const int margin = spec.array_size + 2;
  Canvas base;
  base.offset_x = static_cast<int>(std::floor(minx)) - margin;
  base.offset_y = static_cast<int>(std::floor(miny)) - margin;
  base.width = static_cast<int>(std::ceil(maxx)) + margin - base.offset_x + 1;
  base.height = static_cast<int>(std::ceil(maxy)) + margin - base.offset_y + 1;
  base.values.assign(static_cast<std::size_t>(base.width) * base.height, spec.background);

  // Texture: Gaussian blobs spread over the canvas, then uniform noise.
  for (int b = 0; b < spec.blobs; ++b) {
    const double cx = base.offset_x + unit(rng) * (base.width - 1);
    const double cy = base.offset_y + unit(rng) * (base.height - 1);
    const double amp = spec.blob_amplitude_min + unit(rng) * (spec.blob_amplitude_max - spec.blob_amplitude_min);
    const double sg = spec.blob_sigma_min + unit(rng) * (spec.blob_sigma_max - spec.blob_sigma_min);
    for (int row = 0; row < base.height; ++row) {
      for (int col = 0; col < base.width; ++col) {
        const double dx = col + base.offset_x - cx, dy = row + base.offset_y - cy;
        base.at(col, row) += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sg * sg));
      }
    }
  }
  if (spec.noise > 0.0) {
    for (double& v : base.values) v += spec.noise * (2.0 * unit(rng) - 1.0);
  }

  // Growth fields g_0 .. g_{steps-2} on the canvas.
  std::vector<Canvas> growth(static_cast<std::size_t>(std::max(spec.steps - 1, 0)), base);
  for (auto& g : growth) std::fill(g.values.begin(), g.values.end(), 0.0);
  if (spec.growth == GrowthKind::Constant) {
    for (auto& g : growth) std::fill(g.values.begin(), g.values.end(), spec.growth_rate);
  } else if (spec.growth == GrowthKind::Stcar) {
    // Driver lattice aligned with the layout, extended over the canvas.
    const int sp = spec.spacing;
    const int first_col = layout.center_cols.front();
    const int first_row = layout.center_rows.front();
    const int c0 = first_col - sp * static_cast<int>(std::ceil(double(first_col - base.offset_x) / sp));
    const int r0 = first_row - sp * static_cast<int>(std::ceil(double(first_row - base.offset_y) / sp));
    const int cols = (base.offset_x + base.width - 1 - c0) / sp + 1;
    const int rows = (base.offset_y + base.height - 1 - r0) / sp + 1;
    std::vector<Point> nodes_km;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) nodes_km.push_back(grid.to_km(c0 + c * sp, r0 + r * sp));
    }

    for (int j = 0; j < spec.kernels; ++j) {
      truth.kernel_centers.push_back(grid.to_km(unit(rng) * (spec.width - 1), unit(rng) * (spec.height - 1)));
    }
    const KernelMeanModel mean_model(truth.kernel_centers, spec.bandwidth_km);
    truth.gamma.resize(static_cast<Eigen::Index>(mean_model.parameter_count()));
    for (Eigen::Index j = 0; j < truth.gamma.size(); ++j) {
      const double scale = j % 3 == 0 ? 1.0 : 0.3;
      truth.gamma[j] = spec.gamma_scale * scale * (2.0 * unit(rng) - 1.0);
    }
    const Eigen::VectorXd mu = mean_model.design(nodes_km) * truth.gamma;

    StcarFit driver;
    driver.neighborhood = Neighborhood(nodes_km, 1.5 * sp * spec.cell_km);
    driver.r = spec.r;
    TimeFit tf;
    tf.car = build_weights(driver.neighborhood, nodes_km, WeightFunction::Binary);
    const RhoInterval bounds = rho_bounds(tf.car);
    if (!bounds.contains(spec.rho)) throw ConfigError("rho: outside the admissible interval of the driver lattice");
    tf.rho = spec.rho;
    tf.sigma = spec.sigma;
    driver.times.push_back(std::move(tf));
    SamplerOptions opts;
    opts.burn_in = static_cast<std::size_t>(spec.burn_in);
    const auto ys = sample_stcar(driver, growth.size(), rng(), opts);

    for (std::size_t t = 0; t < growth.size(); ++t) {
      const Eigen::VectorXd drv = mu + ys[t];
      Canvas& g = growth[t];
      for (int row = 0; row < g.height; ++row) {
        for (int col = 0; col < g.width; ++col) {
          const double fx = std::clamp(double(col + g.offset_x - c0) / sp, 0.0, double(cols - 1));
          const double fy = std::clamp(double(row + g.offset_y - r0) / sp, 0.0, double(rows - 1));
          const int x0 = std::min(static_cast<int>(fx), cols - 1), y0 = std::min(static_cast<int>(fy), rows - 1);
          const int x1 = std::min(x0 + 1, cols - 1), y1 = std::min(y0 + 1, rows - 1);
          const double ax = fx - x0, ay = fy - y0;
          auto node = [&](int r, int c) { return drv[static_cast<Eigen::Index>(r * cols + c)]; };
          g.at(col, row) = (1 - ax) * (1 - ay) * node(y0, x0) + ax * (1 - ay) * node(y0, x1) +
                           (1 - ax) * ay * node(y1, x0) + ax * ay * node(y1, x1);
        }
      }
    }
    truth.rho = spec.rho;
    truth.sigma = spec.sigma;
    truth.r = spec.r;
  }

  // Material fields: M_1 = M_0 + g_0, then M_{t+1} = M_{t-1} + 2 g_t.
  std::vector<Canvas> material;
  material.push_back(base);
  if (spec.steps > 1) {
    Canvas m1 = base;
    for (std::size_t k = 0; k < m1.values.size(); ++k) m1.values[k] += growth[0].values[k];
    material.push_back(std::move(m1));
  }
  for (int t = 1; t + 1 < spec.steps; ++t) {
    Canvas next = material[static_cast<std::size_t>(t - 1)];
    const auto& g = growth[static_cast<std::size_t>(t)];
    for (std::size_t k = 0; k < next.values.size(); ++k) next.values[k] += 2.0 * g.values[k];
    material.push_back(std::move(next));
  }

  for (int t = 0; t < spec.steps; ++t) {
    std::vector<double> values(static_cast<std::size_t>(spec.width) * spec.height);
    const Canvas& m = material[static_cast<std::size_t>(t)];
    for (int row = 0; row < spec.height; ++row) {
      for (int col = 0; col < spec.width; ++col) {
        values[static_cast<std::size_t>(row) * spec.width + col] =
            m.sample(motion_inverse(spec, Point{double(col), double(row)}, t));
      }
    }
    scene.frames.emplace_back(grid, spec.timestamp0 + t * spec.time_step, std::move(values));
  }

  // Truth bundle.
  for (int t = 0; t < spec.steps; ++t) {
    std::vector<Point> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Point s{double(layout.center_cols[i]), double(layout.center_rows[i])};
      pos[i] = grid.to_km(motion_forward(spec, s, t).x, motion_forward(spec, s, t).y);
    }
    truth.positions.push_back(std::move(pos));
  }
  for (int t = 0; t + 1 < spec.steps; ++t) {
    std::vector<Point> vel(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Point s{double(layout.center_cols[i]), double(layout.center_rows[i])};
      const Point d = motion_forward(spec, motion_inverse(spec, s, t), t + 1) - s;
      vel[i] = spec.cell_km * d;
    }
    truth.velocities.push_back(std::move(vel));
  }
  const int half = spec.array_size / 2;
  for (int t = 1; t + 1 < spec.steps; ++t) {
    GrowthField gf;
    gf.t = t;
    gf.values.resize(n);
    const auto& g = growth[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
          sum += g.at(layout.center_cols[i] + dx - g.offset_x, layout.center_rows[i] + dy - g.offset_y);
        }
      }
      gf.values[i] = sum / double(spec.array_size * spec.array_size);
    }
    const auto prev = sample_reflectivity(scene.frames[static_cast<std::size_t>(t - 1)],
                                          truth.positions[static_cast<std::size_t>(t - 1)], spec.array_size);
    const auto next = sample_reflectivity(scene.frames[static_cast<std::size_t>(t + 1)],
                                          truth.positions[static_cast<std::size_t>(t + 1)], spec.array_size);
    gf.valid.resize(n);
    for (std::size_t i = 0; i < n; ++i) gf.valid[i] = prev.valid[i] && next.valid[i];
    truth.growth.push_back(std::move(gf));
  }
  return scene;
}

namespace {

template <typename ErrorAt>
ErrorReport summarize(std::size_t size, double tolerance, const std::vector<bool>& valid, ErrorAt error_at) {
  if (!valid.empty() && valid.size() != size) throw DataError("truth_compare: mask length mismatch");
  ErrorReport rep;
  double sum = 0.0, sq = 0.0;
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < size; ++i) {
    if (!valid.empty() && !valid[i]) continue;
    const double e = error_at(i);
    rep.max_abs = std::max(rep.max_abs, std::abs(e));
    sum += e;
    sq += e * e;
    if (std::abs(e) > tolerance) ++mismatched;
    ++rep.count;
  }
  if (rep.count > 0) {
    const double c = static_cast<double>(rep.count);
    rep.bias = sum / c;
    rep.rmse = std::sqrt(sq / c);
    rep.mismatch_fraction = static_cast<double>(mismatched) / c;
  }
  return rep;
}

}  // namespace

ErrorReport truth_compare(std::span<const double> estimated, std::span<const double> truth, double tolerance,
                          const std::vector<bool>& valid) {
  if (estimated.size() != truth.size()) throw DataError("truth_compare: shape mismatch");
  return summarize(estimated.size(), tolerance, valid, [&](std::size_t i) { return estimated[i] - truth[i]; });
}

ErrorReport truth_compare(std::span<const Point> estimated, std::span<const Point> truth, double tolerance,
                          const std::vector<bool>& valid) {
  if (estimated.size() != truth.size()) throw DataError("truth_compare: shape mismatch");
  ErrorReport rep =
      summarize(estimated.size(), tolerance, valid, [&](std::size_t i) { return norm(estimated[i] - truth[i]); });
  Point mean{};
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    mean = mean + (estimated[i] - truth[i]);
  }
  rep.bias = rep.count > 0 ? norm((1.0 / static_cast<double>(rep.count)) * mean) : 0.0;
  return rep;
}

}  // namespace nowcast
