#include "sloc/ballwalk.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_BallWalkStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto model = sloc::BaseDensity::standard_gaussian(n);
  sloc::Rng rng = sloc::make_stream(1, sloc::streams::chain);
  sloc::Vec x = sloc::Vec::Zero(n);
  for (auto _ : state) {
    x = sloc::ball_walk_step(x, 1.0 / std::sqrt(n), model, rng).x;
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_BallWalkStep)->Arg(2)->Arg(16);

}  // namespace
