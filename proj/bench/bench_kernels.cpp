// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>
#include <Eigen/Geometry>

#include "shotdirector/attention.hpp"
#include "shotdirector/camera_geometry.hpp"
#include "shotdirector/shot_mask.hpp"
#include "shotdirector/training.hpp"

using namespace shotdirector;

namespace {

CameraPose bench_pose() {
  const Mat3 r = Eigen::AngleAxisd(0.3, Vec3(0.2, 1.0, 0.1).normalized()).toRotationMatrix();
  return {CameraIntrinsics(500, 500, 320, 240, 640, 480), CameraExtrinsics(r, Vec3(0.5, -0.2, 1.0)), 0};
}

void BM_plucker_map(benchmark::State& state) {
  const auto pose = bench_pose();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(plucker_map(pose, n, n));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}

void BM_plucker_map_serial(benchmark::State& state) {
  const auto pose = bench_pose();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(plucker_map_serial(pose, n, n));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}

// Shots of 4 frames over a 8x8 patch grid.
TokenLayout bench_layout(std::size_t shots) { return make_layout(shots, 4, 8, 8, 16, 8); }

void BM_build_mask(benchmark::State& state) {
  const auto l = bench_layout(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_mask(l));
  state.counters["tokens"] = static_cast<double>(l.total_tokens());
}

void BM_build_mask_serial(benchmark::State& state) {
  const auto l = bench_layout(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_mask_serial(l));
  state.counters["tokens"] = static_cast<double>(l.total_tokens());
}

template <bool Parallel>
void attention_bench(benchmark::State& state) {
  const auto l = bench_layout(static_cast<std::size_t>(state.range(0)));
  const std::size_t d = 64;
  const auto params = AttentionParams<float>::init(d, 4, 1);
  const auto x = random_tensor<float>({l.total_tokens(), d}, 2);
  const auto mask = build_mask(l);
  for (auto _ : state) {
    if constexpr (Parallel) benchmark::DoNotOptimize(masked_attention(params, x, mask));
    else benchmark::DoNotOptimize(masked_attention_serial(params, x, mask));
  }
  state.counters["tokens"] = static_cast<double>(l.total_tokens());
}

void BM_masked_attention(benchmark::State& state) { attention_bench<true>(state); }
void BM_masked_attention_serial(benchmark::State& state) { attention_bench<false>(state); }

}  // namespace

BENCHMARK(BM_plucker_map)->Arg(64)->Arg(256);
BENCHMARK(BM_plucker_map_serial)->Arg(64)->Arg(256);
BENCHMARK(BM_build_mask)->Arg(2)->Arg(4);
BENCHMARK(BM_build_mask_serial)->Arg(2)->Arg(4);
BENCHMARK(BM_masked_attention)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_masked_attention_serial)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
