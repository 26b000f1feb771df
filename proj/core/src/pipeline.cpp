#include "nowcast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "nowcast/error.hpp"
#include "nowcast/text_io.hpp"

namespace nowcast {

namespace {

double config_double(const std::string& key, const std::string& value) {
  try {
    return text::parse_double(value, key);
  } catch (const DataError&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
}

long long config_int(const std::string& key, const std::string& value) {
  try {
    return text::parse_int(value, key);
  } catch (const DataError&) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
}

WeightFunction parse_weight(const std::string& key, const std::string& value) {
  if (value == "binary") return WeightFunction::Binary;
  if (value == "inverse_distance") return WeightFunction::InverseDistance;
  throw ConfigError(key + ": expected binary or inverse_distance, got '" + value + "'");
}

std::string weight_name(WeightFunction w) { return w == WeightFunction::Binary ? "binary" : "inverse_distance"; }

struct Field {
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Field int_field(T PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.*member = static_cast<T>(config_int(k, v));
          },
          [member](const PipelineConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(double PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = config_double(k, v); },
          [member](const PipelineConfig& c) { return text::format_double(c.*member); }};
}

template <typename Sub, typename T>
Field nested(Sub PipelineConfig::*sub, T Sub::*member) {
  return {[sub, member](PipelineConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.*sub.*member = config_double(k, v);
            } else {
              c.*sub.*member = static_cast<T>(config_int(k, v));
            }
          },
          [sub, member](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return text::format_double(c.*sub.*member);
            } else {
              return std::to_string(c.*sub.*member);
            }
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"array_size", int_field(&PipelineConfig::array_size)},
      {"spacing", int_field(&PipelineConfig::spacing)},
      {"search_radius", nested(&PipelineConfig::motion, &MotionConfig::search_radius)},
      {"min_correlation", nested(&PipelineConfig::motion, &MotionConfig::min_valid_correlation)},
      {"min_patch_variance", nested(&PipelineConfig::motion, &MotionConfig::min_patch_variance)},
      {"lambda", nested(&PipelineConfig::motion, &MotionConfig::lambda)},
      {"smooth_tolerance", nested(&PipelineConfig::motion, &MotionConfig::tolerance)},
      {"smooth_max_iterations", nested(&PipelineConfig::motion, &MotionConfig::max_iterations)},
      {"kernels", int_field(&PipelineConfig::kernels)},
      {"bandwidth_km", double_field(&PipelineConfig::bandwidth_km)},
      {"neighbor_distance_km", double_field(&PipelineConfig::neighbor_distance_km)},
      {"weight",
       {[](PipelineConfig& c, const std::string& k, const std::string& v) { c.weight = parse_weight(k, v); },
        [](const PipelineConfig& c) { return weight_name(c.weight); }}},
      {"max_iterations", nested(&PipelineConfig::estimation, &EstimationConfig::max_iterations)},
      {"tolerance", nested(&PipelineConfig::estimation, &EstimationConfig::tolerance)},
      {"rho_tolerance", nested(&PipelineConfig::estimation, &EstimationConfig::rho_tolerance)},
      {"multistarts", nested(&PipelineConfig::estimation, &EstimationConfig::multistarts)},
      {"ridge", nested(&PipelineConfig::estimation, &EstimationConfig::ridge)},
      {"q", nested(&PipelineConfig::estimation, &EstimationConfig::q)},
      {"horizon", int_field(&PipelineConfig::horizon)},
      {"threshold_dbz", double_field(&PipelineConfig::threshold_dbz)},
      {"seed",
       {[](PipelineConfig& c, const std::string& k, const std::string& v) {
          const long long s = config_int(k, v);
          if (s < 0) throw ConfigError(k + ": must be >= 0");
          c.seed = static_cast<std::uint64_t>(s);
        },
        [](const PipelineConfig& c) { return std::to_string(c.seed); }}},
  };
  return table;
}

// Re-throws a module validation failure under the owning key name.
template <typename F>
void check(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const auto& table = fields();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

std::string PipelineConfig::get(const std::string& key) const {
  const auto& table = fields();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, v] : fields()) out.push_back(k);
    return out;
  }();
  return names;
}

void PipelineConfig::validate() const {
  if (array_size < 3 || array_size % 2 == 0) throw ConfigError("array_size: must be odd and >= 3");
  if (spacing < 1) throw ConfigError("spacing: must be >= 1");
  if (motion.search_radius < 1) throw ConfigError("search_radius: must be >= 1");
  if (!(motion.min_valid_correlation >= -1.0 && motion.min_valid_correlation <= 1.0)) {
    throw ConfigError("min_correlation: must lie in [-1, 1]");
  }
  if (!(motion.min_patch_variance >= 0.0)) throw ConfigError("min_patch_variance: must be >= 0");
  if (!(motion.lambda >= 0.0) || !std::isfinite(motion.lambda)) throw ConfigError("lambda: must be >= 0");
  if (!(motion.tolerance > 0.0)) throw ConfigError("smooth_tolerance: must be > 0");
  if (motion.max_iterations < 1) throw ConfigError("smooth_max_iterations: must be >= 1");
  check("motion", [&] { motion.validate(); });
  if (kernels < 1) throw ConfigError("kernels: must be >= 1");
  if (!(bandwidth_km > 0.0) || !std::isfinite(bandwidth_km)) throw ConfigError("bandwidth_km: must be > 0");
  if (!(neighbor_distance_km >= 0.0) || !std::isfinite(neighbor_distance_km)) {
    throw ConfigError("neighbor_distance_km: must be >= 0 (0 selects 1.5 x lattice spacing)");
  }
  if (estimation.max_iterations < 1) throw ConfigError("max_iterations: must be >= 1");
  if (!(estimation.tolerance > 0.0)) throw ConfigError("tolerance: must be > 0");
  if (!(estimation.rho_tolerance > 0.0) || !std::isfinite(estimation.rho_tolerance)) {
    throw ConfigError("rho_tolerance: must be > 0");
  }
  if (estimation.multistarts < 1) throw ConfigError("multistarts: must be >= 1");
  if (!(estimation.ridge >= 0.0) || !std::isfinite(estimation.ridge)) throw ConfigError("ridge: must be >= 0");
  if (estimation.q < 1) throw ConfigError("q: must be >= 1");
  if (horizon < 1) throw ConfigError("horizon: must be >= 1");
  if (!std::isfinite(threshold_dbz)) throw ConfigError("threshold_dbz: must be finite");
}

double PipelineConfig::neighbor_distance(const ArrayLayout& layout) const {
  return neighbor_distance_km > 0.0 ? neighbor_distance_km : 1.5 * layout.lattice.spacing_km;
}

PipelineConfig parse_config(std::string_view text, const std::string& source) {
  PipelineConfig cfg;
  for (const auto& kv : text::parse_key_values(text, source, true)) cfg.set(kv.key, kv.value);
  cfg.validate();
  return cfg;
}

std::string format_config(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& key : PipelineConfig::keys()) out += key + " = " + cfg.get(key) + "\n";
  return out;
}

PreparedSequence prepare(std::span<const ReflectivityField> scans, const PipelineConfig& cfg) {
  cfg.validate();
  if (scans.size() < 3) throw DataError("need at least 3 scans to extract growth");
  validate_sequence(scans);
  PreparedSequence out;
  out.layout = build_layout(scans.front().geometry(), cfg.array_size, cfg.spacing);
  for (const auto& s : scans) out.timestamps.push_back(s.timestamp());

  out.track = start_track(out.layout);
  for (std::size_t k = 0; k + 1 < scans.size(); ++k) {
    const VelocityField raw = trec(scans[k], scans[k + 1], out.layout, cfg.motion);
    out.velocities.push_back(smooth_velocity(raw, cfg.motion));
    out.track = translate(out.track, out.velocities.back(), +1);
  }

  for (std::size_t k = 0; k < scans.size(); ++k) {
    ArraySample s = sample_reflectivity(scans[k], out.track.at(k), cfg.array_size);
    if (k > 0) {
      const auto& before = out.samples.back();
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!before.valid[i]) s.valid[i] = false;
      }
    }
    out.samples.push_back(std::move(s));
  }
  for (std::size_t k = 1; k + 1 < scans.size(); ++k) {
    out.growth.push_back(growth_from_scans(out.samples[k - 1], out.samples[k + 1], static_cast<int>(k)));
  }
  return out;
}

std::vector<std::size_t> active_arrays(const PreparedSequence& prepared, const Neighborhood& full) {
  const std::size_t n = prepared.layout.count();
  std::vector<bool> keep(n, true);
  for (const auto& g : prepared.growth) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!g.valid[i]) keep[i] = false;
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) continue;
      const auto& nb = full.neighbors(i);
      if (std::none_of(nb.begin(), nb.end(), [&](std::size_t j) { return keep[j]; })) {
        keep[i] = false;
        changed = true;
      }
    }
  }
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) ids.push_back(i);
  }
  return ids;
}

namespace {

template <typename T>
std::vector<T> pick(const std::vector<T>& all, std::span<const std::size_t> ids) {
  std::vector<T> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) out.push_back(all[i]);
  return out;
}

Eigen::VectorXd pick_vector(const std::vector<double>& all, std::span<const std::size_t> ids) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) out[static_cast<Eigen::Index>(k)] = all[ids[k]];
  return out;
}

TimeFit time_structure(const PreparedSequence& prepared, const StcarFit& fit, std::size_t g) {
  const GrowthField& growth = prepared.growth[g];
  TimeFit tf;
  tf.t = growth.t;
  tf.positions = pick(prepared.track.at(static_cast<std::size_t>(growth.t)), fit.arrays);
  tf.car = build_weights(fit.neighborhood, tf.positions, fit.phi);
  tf.design = fit.kernels.design(tf.positions);
  tf.growth = pick_vector(growth.values, fit.arrays);
  return tf;
}

}  // namespace

FitResult estimate_fit(const PreparedSequence& prepared, const PipelineConfig& cfg) {
  cfg.validate();
  const auto q = static_cast<std::size_t>(cfg.estimation.q);
  if (prepared.growth.size() < q + 1) {
    throw DataError("insufficient history: " + std::to_string(prepared.growth.size()) + " growth times (" +
                    std::to_string(prepared.timestamps.size()) + " scans) for q = " + std::to_string(q) +
                    "; need at least " + std::to_string(q + 3) + " scans");
  }
  FitResult result;
  StcarFit& fit = result.fit;
  const Neighborhood full(prepared.track.reference, cfg.neighbor_distance(prepared.layout));
  fit.arrays = active_arrays(prepared, full);
  if (fit.arrays.empty()) throw DataError("no array stays valid and connected across the window");
  fit.neighborhood = full.restrict(fit.arrays);
  fit.phi = cfg.weight;

  const GrowthField& first = prepared.growth.front();
  GrowthField first_active;
  first_active.t = first.t;
  first_active.values = pick(first.values, fit.arrays);
  first_active.valid.assign(fit.arrays.size(), true);
  const auto first_positions = pick(prepared.track.at(static_cast<std::size_t>(first.t)), fit.arrays);
  fit.kernels = place_kernels(first_active, first_positions, static_cast<std::size_t>(cfg.kernels), cfg.bandwidth_km,
                              cfg.seed);

  for (std::size_t g = 0; g < prepared.growth.size(); ++g) {
    TimeFit tf = time_structure(prepared, fit, g);
    const IrwglsResult r = irwgls(tf.growth, tf.design, tf.car, cfg.estimation);
    tf.gamma = r.gamma;
    tf.residual = r.residual;
    tf.rho = r.rho;
    tf.sigma = r.sigma;
    tf.loglik = r.loglik;
    tf.iterations = r.iterations;
    tf.converged = r.converged;
    if (!r.converged) {
      result.warnings.push_back("time " + std::to_string(prepared.timestamps[static_cast<std::size_t>(tf.t)]) +
                                ": IRWGLS did not converge in " + std::to_string(r.iterations) + " iterations");
    }
    fit.times.push_back(std::move(tf));
  }

  double largest = 0.0;
  for (const auto& tf : fit.times) largest = std::max(largest, tf.growth.cwiseAbs().maxCoeff());
  if (largest == 0.0) {
    fit.r.assign(q, 0.0);
    result.warnings.push_back("growth is identically zero; temporal coefficients set to 0");
  } else {
    fit.r = wls_temporal(fit.times, cfg.estimation.q);
  }
  return result;
}

FitFile to_fit_file(const StcarFit& fit, const PreparedSequence& prepared) {
  FitFile f;
  f.array_size = prepared.layout.array_size;
  f.spacing = prepared.layout.spacing;
  f.grid = prepared.layout.grid;
  f.arrays = prepared.layout.count();
  f.active = fit.arrays;
  f.neighbor_distance_km = fit.neighborhood.distance();
  f.weight = fit.phi;
  f.bandwidth_km = fit.kernels.bandwidth();
  f.kernel_centers = fit.kernels.centers();
  f.r = fit.r;
  for (const auto& tf : fit.times) {
    FitFile::Block b;
    b.timestamp = prepared.timestamps.at(static_cast<std::size_t>(tf.t));
    b.rho = tf.rho;
    b.sigma = tf.sigma;
    b.loglik = tf.loglik;
    b.iterations = tf.iterations;
    b.converged = tf.converged;
    b.gamma.assign(tf.gamma.data(), tf.gamma.data() + tf.gamma.size());
    f.times.push_back(std::move(b));
  }
  return f;
}

std::string format_fit_file(const FitFile& f) {
  using text::format_double;
  std::ostringstream o;
  o << "# nowcast STCAR fit\n";
  o << "version = 1\n";
  o << "array_size = " << f.array_size << "\n";
  o << "spacing = " << f.spacing << "\n";
  o << "grid = " << f.grid.width << ' ' << f.grid.height << ' ' << format_double(f.grid.origin.x) << ' '
    << format_double(f.grid.origin.y) << ' ' << format_double(f.grid.cell_km) << "\n";
  o << "arrays = " << f.arrays << "\n";
  o << "active =";
  for (auto i : f.active) o << ' ' << i;
  o << "\nneighbor_distance_km = " << format_double(f.neighbor_distance_km) << "\n";
  o << "weight = " << weight_name(f.weight) << "\n";
  o << "bandwidth_km = " << format_double(f.bandwidth_km) << "\n";
  o << "kernel_centers =";
  for (const auto& c : f.kernel_centers) o << ' ' << format_double(c.x) << ' ' << format_double(c.y);
  o << "\nq = " << f.r.size() << "\n";
  o << "r =";
  for (double v : f.r) o << ' ' << format_double(v);
  o << "\ntimes =";
  for (const auto& b : f.times) o << ' ' << b.timestamp;
  o << "\n";
  for (const auto& b : f.times) {
    o << "\n[time " << b.timestamp << "]\n";
    o << "rho = " << format_double(b.rho) << "\n";
    o << "sigma = " << format_double(b.sigma) << "\n";
    o << "loglik = " << format_double(b.loglik) << "\n";
    o << "iterations = " << b.iterations << "\n";
    o << "converged = " << (b.converged ? "true" : "false") << "\n";
    o << "gamma =";
    for (double v : b.gamma) o << ' ' << format_double(v);
    o << "\n";
  }
  return o.str();
}

FitFile parse_fit_file(std::string_view text, const std::string& source) {
  FitFile f;
  FitFile::Block* block = nullptr;
  std::size_t expected_q = 0;
  bool have_version = false;
  int line_no = 0;
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> DataError {
    return DataError(source + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.substr(0, 6) != "[time ") throw fail("malformed block header");
      FitFile::Block b;
      b.timestamp = text::parse_int(text::trim(line.substr(6, line.size() - 7)), "block timestamp");
      f.times.push_back(std::move(b));
      block = &f.times.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected 'key = value'");
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string_view value = text::trim(line.substr(eq + 1));
    const auto tokens = text::split_ws(value);
    auto one = [&]() -> std::string_view {
      if (tokens.size() != 1) throw fail(key + ": expected one value");
      return tokens.front();
    };
    if (block != nullptr) {
      if (key == "rho") block->rho = text::parse_double(one(), key);
      else if (key == "sigma") block->sigma = text::parse_double(one(), key);
      else if (key == "loglik") block->loglik = text::parse_double(one(), key);
      else if (key == "iterations") block->iterations = static_cast<int>(text::parse_int(one(), key));
      else if (key == "converged") {
        const auto v = one();
        if (v != "true" && v != "false") throw fail("converged: expected true or false");
        block->converged = v == "true";
      } else if (key == "gamma") {
        for (auto t : tokens) block->gamma.push_back(text::parse_double(t, key));
      } else {
        throw fail("unknown key '" + key + "' in time block");
      }
      continue;
    }
    if (key == "version") {
      if (text::parse_int(one(), key) != 1) throw fail("unsupported fit file version");
      have_version = true;
    } else if (key == "array_size") f.array_size = static_cast<int>(text::parse_int(one(), key));
    else if (key == "spacing") f.spacing = static_cast<int>(text::parse_int(one(), key));
    else if (key == "grid") {
      if (tokens.size() != 5) throw fail("grid: expected 5 values");
      f.grid.width = static_cast<int>(text::parse_int(tokens[0], key));
      f.grid.height = static_cast<int>(text::parse_int(tokens[1], key));
      f.grid.origin = {text::parse_double(tokens[2], key), text::parse_double(tokens[3], key)};
      f.grid.cell_km = text::parse_double(tokens[4], key);
    } else if (key == "arrays") f.arrays = static_cast<std::size_t>(text::parse_int(one(), key));
    else if (key == "active") {
      for (auto t : tokens) f.active.push_back(static_cast<std::size_t>(text::parse_int(t, key)));
    } else if (key == "neighbor_distance_km") f.neighbor_distance_km = text::parse_double(one(), key);
    else if (key == "weight") {
      const auto v = one();
      if (v == "binary") f.weight = WeightFunction::Binary;
      else if (v == "inverse_distance") f.weight = WeightFunction::InverseDistance;
      else throw fail("weight: unknown function");
    } else if (key == "bandwidth_km") f.bandwidth_km = text::parse_double(one(), key);
    else if (key == "kernel_centers") {
      if (tokens.size() % 2 != 0) throw fail("kernel_centers: expected x y pairs");
      for (std::size_t k = 0; k < tokens.size(); k += 2) {
        f.kernel_centers.push_back({text::parse_double(tokens[k], key), text::parse_double(tokens[k + 1], key)});
      }
    } else if (key == "q") expected_q = static_cast<std::size_t>(text::parse_int(one(), key));
    else if (key == "r") {
      for (auto t : tokens) f.r.push_back(text::parse_double(t, key));
    } else if (key == "times") {
      // Informational; the blocks carry the timestamps.
    } else {
      throw fail("unknown key '" + key + "'");
    }
  }
  if (!have_version) throw DataError(source + ": missing version line");
  if (f.r.empty() || f.r.size() != expected_q) throw DataError(source + ": r line does not match q");
  if (f.kernel_centers.empty()) throw DataError(source + ": no kernel centers");
  if (f.times.empty()) throw DataError(source + ": no time blocks");
  for (const auto& b : f.times) {
    if (b.gamma.size() != 3 * f.kernel_centers.size()) {
      throw DataError(source + ": time " + std::to_string(b.timestamp) + " has " + std::to_string(b.gamma.size()) +
                      " gamma values, expected " + std::to_string(3 * f.kernel_centers.size()));
    }
  }
  for (auto i : f.active) {
    if (i >= f.arrays) throw DataError(source + ": active array id out of range");
  }
  return f;
}

void write_fit_file(const FitFile& file, const std::filesystem::path& path) {
  text::write_file_atomic(path, format_fit_file(file));
}

FitFile read_fit_file(const std::filesystem::path& path) {
  return parse_fit_file(text::read_file(path), path.string());
}

StcarFit assemble_fit(const FitFile& file, const PreparedSequence& prepared) {
  const auto& layout = prepared.layout;
  if (file.array_size != layout.array_size || file.spacing != layout.spacing || file.arrays != layout.count() ||
      !(file.grid == layout.grid)) {
    throw DataError("fit file geometry does not match the scan sequence");
  }
  StcarFit fit;
  fit.arrays = file.active;
  fit.phi = file.weight;
  fit.kernels = KernelMeanModel(file.kernel_centers, file.bandwidth_km);
  fit.r = file.r;
  fit.neighborhood = Neighborhood(prepared.track.reference, file.neighbor_distance_km).restrict(fit.arrays);

  std::map<long long, const FitFile::Block*> blocks;
  for (const auto& b : file.times) blocks[b.timestamp] = &b;
  for (std::size_t g = 0; g < prepared.growth.size(); ++g) {
    const long long ts = prepared.timestamps[static_cast<std::size_t>(prepared.growth[g].t)];
    const auto it = blocks.find(ts);
    if (it == blocks.end()) {
      if (!fit.times.empty()) throw DataError("fit file lacks a block for growth time " + std::to_string(ts));
      continue;
    }
    for (std::size_t i : fit.arrays) {
      if (!prepared.growth[g].valid[i]) {
        throw DataError("array " + std::to_string(i) + " is not valid at time " + std::to_string(ts) +
                        " in this scan sequence");
      }
    }
    TimeFit tf = time_structure(prepared, fit, g);
    const auto& b = *it->second;
    tf.gamma = Eigen::Map<const Eigen::VectorXd>(b.gamma.data(), static_cast<Eigen::Index>(b.gamma.size()));
    tf.residual = tf.growth - tf.design * tf.gamma;
    tf.rho = b.rho;
    tf.sigma = b.sigma;
    tf.loglik = b.loglik;
    tf.iterations = b.iterations;
    tf.converged = b.converged;
    fit.times.push_back(std::move(tf));
  }
  if (fit.times.size() < fit.r.size()) {
    throw DataError("missing history: the scans cover " + std::to_string(fit.times.size()) +
                    " fitted growth times, q = " + std::to_string(fit.r.size()));
  }
  if (fit.times.back().t != prepared.growth.back().t) {
    throw DataError("fit file does not cover the latest growth time of the scan sequence");
  }
  return fit;
}

ForecastSetup forecast_setup(const PreparedSequence& prepared, std::span<const std::size_t> arrays) {
  const std::size_t T = prepared.timestamps.size();
  if (T < 2) throw DataError("forecast needs at least two scans");
  ForecastSetup s;
  s.arrays.assign(arrays.begin(), arrays.end());
  s.prev_positions = pick(prepared.track.at(T - 2), arrays);
  s.last_positions = pick(prepared.track.at(T - 1), arrays);
  s.z_prev = pick_vector(prepared.samples[T - 2].values, arrays);
  s.z_last = pick_vector(prepared.samples[T - 1].values, arrays);
  for (std::size_t i : arrays) {
    if (!prepared.samples[T - 1].valid[i] || !prepared.samples[T - 2].valid[i]) {
      throw DataError("array " + std::to_string(i) + " has no valid reflectivity at the base time");
    }
  }
  s.base_time = prepared.timestamps.back();
  s.time_step = prepared.timestamps[T - 1] - prepared.timestamps[T - 2];
  return s;
}

}  // namespace nowcast
