#include "sloc/tensor.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_TensorT(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const sloc::Ensemble e = sloc::sample_base(sloc::BaseDensity::product_exponential(n), 20000, 2);
  const sloc::Mat I = sloc::Mat::Identity(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(sloc::tensor_T(e, I, I, I));
}
BENCHMARK(BM_TensorT)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_ThirdMomentCube(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const sloc::Ensemble e = sloc::sample_base(sloc::BaseDensity::product_exponential(n), 100000, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sloc::third_moment_cube(e));
}
BENCHMARK(BM_ThirdMomentCube)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
