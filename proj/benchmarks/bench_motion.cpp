#include <benchmark/benchmark.h>

#include "nowcast/motion.hpp"
#include "nowcast/pipeline.hpp"
#include "nowcast/synth.hpp"

namespace {

using namespace nowcast;

Scene scene_of(int size, int steps, GrowthKind growth) {
  SceneSpec spec;
  spec.width = spec.height = size;
  spec.steps = steps;
  spec.growth = growth;
  return generate_scene(spec);
}

void BM_Trec(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const Scene scene = scene_of(size, 2, GrowthKind::Zero);
  const auto layout = build_layout(scene.frames[0].geometry(), 19, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(trec(scene.frames[0], scene.frames[1], layout, MotionConfig{}));
  }
  state.counters["arrays"] = static_cast<double>(layout.count());
}
BENCHMARK(BM_Trec)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SmoothVelocity(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const LatticeGeometry lattice{side, side, {0, 0}, 2.5};
  VelocityField raw = uniform_velocity(lattice, {0, 0});
  for (std::size_t i = 0; i < raw.count(); ++i) {
    raw.raw[i] = {std::sin(0.3 * double(i)), std::cos(0.17 * double(i))};
  }
  raw.smooth = raw.raw;
  for (auto _ : state) benchmark::DoNotOptimize(smooth_velocity(raw, MotionConfig{}));
}
BENCHMARK(BM_SmoothVelocity)->Arg(22)->Arg(93)->Unit(benchmark::kMillisecond);

void BM_Prepare(benchmark::State& state) {
  const Scene scene = scene_of(128, 7, GrowthKind::Stcar);
  const PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(prepare(scene.frames, cfg));
}
BENCHMARK(BM_Prepare)->Unit(benchmark::kMillisecond);

}  // namespace
