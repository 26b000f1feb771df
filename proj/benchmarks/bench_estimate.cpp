#include <benchmark/benchmark.h>

#include "nowcast/estimate.hpp"
#include "nowcast/forecast.hpp"
#include "nowcast/pipeline.hpp"
#include "nowcast/synth.hpp"

namespace {

using namespace nowcast;

CarStructure lattice(int side) {
  std::vector<Point> pts;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) pts.push_back({c * 2.5, r * 2.5});
  }
  return build_weights(Neighborhood(pts, 3.75), pts, WeightFunction::Binary);
}

StcarFit single(const CarStructure& car) {
  StcarFit fit;
  TimeFit tf;
  tf.car = car;
  tf.rho = 0.5;
  tf.sigma = 1.0;
  fit.times.push_back(tf);
  fit.r = {0.0};
  return fit;
}

void BM_RhoBounds(benchmark::State& state) {
  const auto car = lattice(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(rho_bounds(car));
}
BENCHMARK(BM_RhoBounds)->Arg(22)->Arg(93)->Unit(benchmark::kMillisecond);

void BM_ProfileMle(benchmark::State& state) {
  const auto car = lattice(static_cast<int>(state.range(0)));
  const Eigen::VectorXd y = sample_stcar(single(car), 1, 3).front();
  const auto bounds = rho_bounds(car);
  for (auto _ : state) benchmark::DoNotOptimize(profile_mle_rho_sigma(y, car, bounds, EstimationConfig{}));
}
BENCHMARK(BM_ProfileMle)->Arg(22)->Arg(93)->Unit(benchmark::kMillisecond);

void BM_FitAndForecast(benchmark::State& state) {
  SceneSpec spec;
  spec.growth = GrowthKind::Stcar;
  const Scene scene = generate_scene(spec);
  const PipelineConfig cfg;
  const auto prepared = prepare(scene.frames, cfg);
  for (auto _ : state) {
    const auto fit = estimate_fit(prepared, cfg).fit;
    const auto setup = forecast_setup(prepared, fit.arrays);
    benchmark::DoNotOptimize(forecast_reflectivity(fit, setup, prepared.velocities.back(), cfg.horizon));
  }
}
BENCHMARK(BM_FitAndForecast)->Unit(benchmark::kMillisecond);

}  // namespace
