#include "sloc/linalg.hpp"
#include "sloc/matineq.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_SymEig(benchmark::State& state) {
  const auto n = static_cast<sloc::Index>(state.range(0));
  const sloc::Mat a = sloc::random_instances(sloc::InstanceKind::psd, n, 1, 3).front();
  for (auto _ : state) benchmark::DoNotOptimize(sloc::sym_eig(a));
}
BENCHMARK(BM_SymEig)->Arg(4)->Arg(8)->Arg(16)->Arg(64);

void BM_LiebThirring(benchmark::State& state) {
  const auto n = static_cast<sloc::Index>(state.range(0));
  const auto ms = sloc::random_instances(sloc::InstanceKind::psd, n, 2, 5);
  for (auto _ : state) benchmark::DoNotOptimize(sloc::lieb_thirring(ms[0], ms[1], 2.5));
}
BENCHMARK(BM_LiebThirring)->Arg(4)->Arg(12);

void BM_ProjectedInverse(benchmark::State& state) {
  const auto n = static_cast<sloc::Index>(state.range(0));
  const sloc::Mat a = sloc::random_instances(sloc::InstanceKind::psd, n, 1, 7).front();
  const sloc::Mat p = sloc::random_instances(sloc::InstanceKind::projector, n, 1, 8).front();
  for (auto _ : state) benchmark::DoNotOptimize(sloc::projected_inverse_limit(a, p));
}
BENCHMARK(BM_ProjectedInverse)->Arg(4)->Arg(12);

}  // namespace
