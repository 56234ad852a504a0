#include <benchmark/benchmark.h>

#include "lsc/calibration.hpp"
#include "lsc/phantom.hpp"
#include "lsc/resample.hpp"

using namespace lsc;

namespace {

const Phantom& skewed_phantom() {
  static const Phantom ph = [] {
    PhantomSpec spec;
    spec.skew.rotation = rotation_from_euler_deg(8.0, -5.0, 12.0);
    spec.skew.translation = Vec3(1.5, -2.0, 0.5);
    return generate_phantom(spec);
  }();
  return ph;
}

void BM_ResampleVolume(benchmark::State& state) {
  const Phantom& ph = skewed_phantom();
  const RigidPose t = ph.pose.inverse();
  for (auto _ : state) benchmark::DoNotOptimize(resample(ph.volume, t, 0.5, int(state.range(0))));
}
BENCHMARK(BM_ResampleVolume)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_ResampleMask(benchmark::State& state) {
  const Phantom& ph = skewed_phantom();
  const RigidPose t = ph.pose.inverse();
  const auto mode = state.range(0) ? MaskInterpolation::Linear : MaskInterpolation::Nearest;
  for (auto _ : state) benchmark::DoNotOptimize(resample(ph.mask, t, 0.5, 1, mode));
}
BENCHMARK(BM_ResampleMask)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CalibrateMask(benchmark::State& state) {
  const Phantom& ph = skewed_phantom();
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_mask(ph.mask));
}
BENCHMARK(BM_CalibrateMask)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
