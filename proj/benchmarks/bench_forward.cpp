// Forward-pass latency per variant and size, batch of one sample in eval mode.
//
//   forcecast_benchmarks --benchmark_filter=desk

#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "forcecast/calibration.hpp"
#include "forcecast/eval.hpp"
#include "forcecast/nn/model.hpp"

namespace {

using namespace forcecast;
using nn::Variant;

nn::ModelBatch one_sample(const nn::ModelSpec& spec) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  nn::ModelBatch b;
  b.size = 1;
  const int s = spec.encoder_input_size(), frames = spec.frames_per_sample();
  if (frames > 0) {
    std::vector<float> f(static_cast<std::size_t>(frames) * 3 * s * s);
    for (auto& v : f) v = u(rng);
    b.frames = nn::Tensor<float>({frames, 3, s, s}, std::move(f));
  }
  std::vector<float> st(5 * kStateSize);
  for (auto& v : st) v = u(rng);
  b.states = nn::Tensor<float>({1, 5, static_cast<int>(kStateSize)}, std::move(st));
  return b;
}

void forward(benchmark::State& state, Variant variant, const std::string& size) {
  const nn::ModelSpec spec = nn::ModelSpec::preset(variant, size);
  nn::ForceModel model(spec);
  const nn::ModelBatch batch = one_sample(spec);
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(batch, false));
  state.counters["hz"] = benchmark::Counter(static_cast<double>(state.iterations()), benchmark::Counter::kIsRate);
}

void register_all() {
  for (const Variant v : {Variant::kFc, Variant::kCnn, Variant::kRcnn, Variant::kVit, Variant::kRvit}) {
    for (const std::string size : {"tiny", "desk"}) {
      benchmark::RegisterBenchmark(("forward/" + nn::to_string(v) + "/" + size).c_str(), forward, v, size)
          ->Unit(benchmark::kMillisecond);
    }
  }
}

const int registered = (register_all(), 0);

void calibrate(benchmark::State& state) {
  CalibrationParams params;
  params.attenuation = 0.9;
  params.gravity_comp = Vec3(0.05, 0.0, -2.2);
  params.tool_bias = Vec3(-0.1, 0.15, 0.05);
  const RigidTransform tf = RigidTransform::from_pose({Vec3(0.1, 0.2, 0.3), Quaternion::from_axis_angle(Vec3::UnitY(), 0.4)});
  Vec3 raw(0.3, -0.2, 1.1);
  for (auto _ : state) {
    raw = calibrate_force(raw, tf, params) * 0.5;
    benchmark::DoNotOptimize(raw);
  }
}
BENCHMARK(calibrate);

void peaks(benchmark::State& state) {
  std::vector<double> series(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < series.size(); ++i) series[i] = std::sin(0.021 * i) + 0.3 * std::sin(0.17 * i);
  for (auto _ : state) benchmark::DoNotOptimize(find_peaks(series));
}
BENCHMARK(peaks)->Arg(1800)->Arg(18000);

}  // namespace

BENCHMARK_MAIN();
