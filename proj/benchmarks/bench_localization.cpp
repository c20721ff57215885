#include "sloc/localization.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_Reweight(benchmark::State& state) {
  const int n = 8;
  const auto base = sloc::BaseDensity::standard_gaussian(n);
  const sloc::Ensemble e = sloc::sample_base(base, state.range(0), 1);
  const sloc::Vec c = sloc::Vec::Constant(n, 0.1);
  const sloc::Mat B = 0.5 * sloc::Mat::Identity(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(sloc::reweight(e, c, B));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Reweight)->Arg(2000)->Arg(100000);

void BM_Run(benchmark::State& state) {
  const auto base = sloc::BaseDensity::standard_gaussian(8);
  const auto policy = state.range(0) == 0 ? sloc::ControlPolicy::identity()
                                          : sloc::ControlPolicy::adaptive(sloc::ControlPolicy::default_u(8, 2), 2);
  sloc::RunOptions opts;
  opts.keep_snapshots = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sloc::run(base, policy, 0.5, 200, {}, 1, opts));
  }
}
BENCHMARK(BM_Run)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
