#include "nowcast_cli/commands.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "nowcast/error.hpp"
#include "nowcast/evaluation.hpp"
#include "nowcast/forecast.hpp"
#include "nowcast/pipeline.hpp"
#include "nowcast/synth.hpp"
#include "nowcast/text_io.hpp"
#include "nowcast_cli/csv_io.hpp"

namespace nowcast::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  std::string spec_path;
  std::string out;
  std::vector<std::string> scans;
  std::string fit_path;
  std::string growth_path;
  std::string method = "both";
  std::vector<std::string> forecast_paths;
  std::vector<std::string> truth_paths;
  std::optional<double> threshold;
  std::optional<double> dbz;
  std::optional<double> rain;
};

PipelineConfig load_config(const Options& opt) {
  PipelineConfig cfg;
  if (!opt.config_path.empty()) {
    std::string text;
    try {
      text = text::read_file(opt.config_path);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    for (const auto& kv : text::parse_key_values(text, opt.config_path, true)) cfg.set(kv.key, kv.value);
  }
  for (const auto& [key, value] : opt.overrides) cfg.set(key, value);
  if (opt.threshold) cfg.threshold_dbz = *opt.threshold;
  cfg.validate();
  return cfg;
}

std::vector<fs::path> to_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

std::string fixed(double v, int precision = 4) {
  if (std::isnan(v)) return "NA";
  std::ostringstream o;
  o << std::fixed << std::setprecision(precision) << v;
  return o.str();
}

int cmd_synth(const Options& opt, std::ostream& out) {
  std::string text;
  try {
    text = text::read_file(opt.spec_path);
  } catch (const DataError& e) {
    throw DataError(e.what());
  }
  const SceneSpec spec = parse_scene_spec(text, opt.spec_path);
  const Scene scene = generate_scene(spec);
  const fs::path dir(opt.out);
  ensure_dir(dir);
  for (std::size_t t = 0; t < scene.frames.size(); ++t) {
    std::ostringstream name;
    name << "scan_" << std::setw(3) << std::setfill('0') << t << ".radar";
    write_field(scene.frames[t], dir / name.str());
  }
  const auto& truth = scene.truth;
  text::write_file_atomic(dir / "truth_velocity.csv", truth_velocity_csv(truth.velocities, truth.layout));
  text::write_file_atomic(dir / "truth_growth.csv", growth_csv(truth.growth, truth.positions));

  std::ostringstream params;
  params << format_scene_spec(spec);
  params << "arrays = " << truth.layout.count() << "\n";
  params << "true_rho = " << text::format_double(truth.rho) << "\n";
  params << "true_sigma = " << text::format_double(truth.sigma) << "\n";
  params << "true_r =";
  for (double v : truth.r) params << ' ' << text::format_double(v);
  params << "\ntrue_kernel_centers =";
  for (const auto& c : truth.kernel_centers) params << ' ' << text::format_double(c.x) << ' ' << text::format_double(c.y);
  params << "\ntrue_gamma =";
  for (Eigen::Index j = 0; j < truth.gamma.size(); ++j) params << ' ' << text::format_double(truth.gamma[j]);
  params << "\n";
  text::write_file_atomic(dir / "truth_params.txt", params.str());
  out << "wrote " << scene.frames.size() << " scans and truth files to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_motion(const Options& opt, std::ostream& out) {
  const PipelineConfig cfg = load_config(opt);
  const auto paths = to_paths(opt.scans);
  const auto scans = read_sequence(paths);
  const ArrayLayout layout = build_layout(scans[0].geometry(), cfg.array_size, cfg.spacing);
  const VelocityField raw = trec(scans[0], scans[1], layout, cfg.motion);
  const VelocityField field = smooth_velocity(raw, cfg.motion);
  text::write_file_atomic(opt.out, velocity_csv(field, layout));

  std::map<std::pair<double, double>, std::size_t> votes;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < field.count(); ++i) {
    if (!field.valid[i]) continue;
    ++valid;
    ++votes[{field.raw[i].x, field.raw[i].y}];
  }
  out << "arrays " << field.count() << ", valid " << valid;
  if (!votes.empty()) {
    const auto best = std::max_element(votes.begin(), votes.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    out << ", modal vector (" << text::format_double(best->first.first) << ", "
        << text::format_double(best->first.second) << ") km/step";
  }
  out << "\n";
  return kExitOk;
}

int cmd_fit(const Options& opt, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = load_config(opt);
  const auto needed = static_cast<std::size_t>(cfg.estimation.q) + 3;
  if (opt.scans.size() < needed) {
    throw DataError("insufficient history: " + std::to_string(opt.scans.size()) + " scans for q = " +
                    std::to_string(cfg.estimation.q) + " (need at least " + std::to_string(needed) + ")");
  }
  const auto scans = read_sequence(to_paths(opt.scans));
  const PreparedSequence prepared = prepare(scans, cfg);
  const FitResult result = estimate_fit(prepared, cfg);
  write_fit_file(to_fit_file(result.fit, prepared), opt.out);
  if (!opt.growth_path.empty()) {
    text::write_file_atomic(opt.growth_path, growth_csv(prepared.growth, prepared.track.positions));
  }
  for (const auto& w : result.warnings) err << "warning: " << w << "\n";

  out << "active arrays " << result.fit.arrays.size() << " of " << prepared.layout.count() << ", kernels "
      << result.fit.kernels.kernel_count() << "\n";
  out << std::left << std::setw(12) << "time" << std::setw(12) << "rho" << std::setw(12) << "sigma"
      << std::setw(16) << "loglik" << std::setw(8) << "iter" << "converged\n";
  for (const auto& tf : result.fit.times) {
    out << std::left << std::setw(12) << prepared.timestamps[static_cast<std::size_t>(tf.t)] << std::setw(12)
        << fixed(tf.rho) << std::setw(12) << fixed(tf.sigma) << std::setw(16) << fixed(tf.loglik, 2) << std::setw(8)
        << tf.iterations << (tf.converged ? "yes" : "no") << "\n";
  }
  out << "r =";
  for (double v : result.fit.r) out << ' ' << fixed(v);
  out << "\n";
  return kExitOk;
}

int cmd_forecast(const Options& opt, std::ostream& out) {
  PipelineConfig cfg = load_config(opt);
  if (opt.method != "stcar" && opt.method != "persistence" && opt.method != "both") {
    throw ConfigError("method: expected stcar, persistence or both");
  }
  const bool want_stcar = opt.method != "persistence";
  if (want_stcar && opt.fit_path.empty()) throw ConfigError("fit: a fit file is required for stcar forecasts");

  std::optional<FitFile> file;
  if (!opt.fit_path.empty()) {
    file = read_fit_file(opt.fit_path);
    cfg.array_size = file->array_size;
    cfg.spacing = file->spacing;
  }
  const auto scans = read_sequence(to_paths(opt.scans));
  const PreparedSequence prepared = prepare(scans, cfg);
  const VelocityField& velocity = prepared.velocities.back();

  std::vector<std::size_t> arrays;
  std::optional<StcarFit> fit;
  if (file) {
    fit = assemble_fit(*file, prepared);
    arrays = fit->arrays;
  } else {
    const std::size_t T = prepared.samples.size();
    for (std::size_t i = 0; i < prepared.layout.count(); ++i) {
      if (prepared.samples[T - 1].valid[i] && prepared.samples[T - 2].valid[i]) arrays.push_back(i);
    }
  }
  const ForecastSetup setup = forecast_setup(prepared, arrays);

  std::vector<Forecast> forecasts;
  if (want_stcar) forecasts.push_back(forecast_reflectivity(*fit, setup, velocity, cfg.horizon));
  if (opt.method != "stcar") forecasts.push_back(persistence_baseline(setup, velocity, cfg.horizon));

  const fs::path dir(opt.out);
  ensure_dir(dir);
  std::string csv = forecast_csv_header();
  const double render_bw = prepared.layout.lattice.spacing_km;
  for (const auto& f : forecasts) {
    csv += forecast_csv_rows(f);
    for (int m = 1; m <= f.horizon(); ++m) {
      ReflectivityField raster = render_forecast(scans.back(), velocity, f, m, render_bw);
      std::vector<double> floored(raster.values().begin(), raster.values().end());
      for (double& v : floored) {
        if (!is_missing(v)) v = clamp_dbz(v);
      }
      const ReflectivityField shown(raster.geometry(), raster.timestamp(), std::move(floored));
      std::ostringstream name, trailer;
      name << to_string(f.method) << "_h" << std::setw(2) << std::setfill('0') << m << ".radar";
      trailer << "FORECAST method=" << to_string(f.method) << " base=" << f.base_time << " horizon=" << m;
      write_field(shown, dir / name.str(), trailer.str());
    }
  }
  text::write_file_atomic(dir / "forecast.csv", csv);
  out << "wrote " << forecasts.size() << " forecast set(s), horizon " << cfg.horizon << ", base time "
      << setup.base_time << ", " << arrays.size() << " arrays, to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& opt, std::ostream& out) {
  const PipelineConfig cfg = load_config(opt);
  std::vector<Forecast> forecasts;
  for (const auto& p : opt.forecast_paths) {
    for (auto& f : parse_forecast_csv(text::read_file(p), p)) forecasts.push_back(std::move(f));
  }
  std::vector<ReflectivityField> truth;
  for (const auto& p : opt.truth_paths) truth.push_back(read_field(p));
  const auto metrics = evaluate_forecasts(forecasts, truth, cfg.array_size, cfg.threshold_dbz);
  text::write_file_atomic(opt.out, metrics_csv(metrics));

  std::vector<std::string> methods;
  for (const auto& m : metrics) {
    if (std::find(methods.begin(), methods.end(), m.method) == methods.end()) methods.push_back(m.method);
  }
  auto panel = [&](const std::string& title, bool thresholded) {
    out << title << "\n" << std::left << std::setw(10) << "horizon";
    for (const auto& name : methods) out << std::setw(16) << name;
    out << "\n";
    const int horizon = forecasts.front().horizon();
    for (int h = 1; h <= horizon; ++h) {
      out << std::left << std::setw(10) << h;
      for (const auto& name : methods) {
        for (const auto& m : metrics) {
          if (m.method == name && m.horizon == h) out << std::setw(16) << fixed(thresholded ? m.acc_mse_thr : m.acc_mse);
        }
      }
      out << "\n";
    }
  };
  panel("accumulative MSE, all arrays", false);
  panel("accumulative MSE, observed > " + text::format_double(cfg.threshold_dbz) + " dBZ", true);
  return kExitOk;
}

int cmd_convert(const Options& opt, std::ostream& out) {
  if (opt.dbz.has_value() == opt.rain.has_value()) throw ConfigError("convert: give exactly one of --dbz or --rain");
  if (opt.dbz) {
    out << text::format_double(*opt.dbz) << " dBZ = " << text::format_double(dbz_to_rainrate(*opt.dbz))
        << " mm/hr\n";
  } else {
    out << text::format_double(*opt.rain) << " mm/hr = " << text::format_double(rainrate_to_dbz(*opt.rain))
        << " dBZ\n";
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radar reflectivity nowcasting with STCAR growth models", "nowcast"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config_path, "Configuration file (key = value)");
  for (const auto& key : PipelineConfig::keys()) {
    app.add_option_function<std::string>(
        "--" + key, [&opt, key](const std::string& v) { opt.overrides[key] = v; },
        "Override config key '" + key + "'");
  }

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
  synth->add_option("--spec", opt.spec_path, "Scene spec file")->required();
  synth->add_option("--out", opt.out, "Output directory")->required();

  auto* motion = app.add_subcommand("motion", "Velocity field between two scans");
  motion->add_option("scans", opt.scans, "Two scan files")->required()->expected(2);
  motion->add_option("--out", opt.out, "Velocity CSV")->required();

  auto* fit = app.add_subcommand("fit", "Fit the STCAR model to a scan sequence");
  fit->add_option("scans", opt.scans, "Scan files, oldest first")->required();
  fit->add_option("--out", opt.out, "Fit file")->required();
  fit->add_option("--growth", opt.growth_path, "Optional growth CSV");

  auto* forecast = app.add_subcommand("forecast", "Nowcast from the last scans");
  forecast->add_option("scans", opt.scans, "Scan files, oldest first")->required();
  forecast->add_option("--fit", opt.fit_path, "Fit file");
  forecast->add_option("--out", opt.out, "Output directory")->required();
  forecast->add_option("--method", opt.method, "stcar, persistence or both");

  auto* eval = app.add_subcommand("eval", "Score forecasts against observed scans");
  eval->add_option("--forecast", opt.forecast_paths, "Forecast CSV files")->required();
  eval->add_option("--truth", opt.truth_paths, "Observed scan files")->required();
  eval->add_option("--out", opt.out, "Metrics CSV")->required();
  eval->add_option("--threshold", opt.threshold, "Observed-reflectivity threshold, dBZ");

  auto* convert = app.add_subcommand("convert", "Convert between dBZ and rain rate (Marshall-Palmer)");
  convert->add_option("--dbz", opt.dbz, "Reflectivity in dBZ");
  convert->add_option("--rain", opt.rain, "Rain rate in mm/hr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(opt, out);
    if (motion->parsed()) return cmd_motion(opt, out);
    if (fit->parsed()) return cmd_fit(opt, out, err);
    if (forecast->parsed()) return cmd_forecast(opt, out);
    if (eval->parsed()) return cmd_eval(opt, out);
    if (convert->parsed()) return cmd_convert(opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace nowcast::cli
