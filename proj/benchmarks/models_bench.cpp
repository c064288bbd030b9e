#include <benchmark/benchmark.h>

#include "fairaudit/models.hpp"
#include "fairaudit/scenario.hpp"

using namespace fairaudit;

static void BM_LogisticPropensity(benchmark::State& state) {
  const auto data = generate(preset("confounded-shift", static_cast<std::size_t>(state.range(0)), 1));
  for (auto _ : state) benchmark::DoNotOptimize(fit_propensity_with(data, LogisticConfig{}, 0.01));
}
BENCHMARK(BM_LogisticPropensity)->Arg(1000)->Arg(4000)->Arg(16000)->Arg(64000)->Unit(benchmark::kMillisecond);

static void BM_BoostedPropensity(benchmark::State& state) {
  const auto data = generate(preset("confounded-shift", static_cast<std::size_t>(state.range(0)), 1));
  for (auto _ : state) benchmark::DoNotOptimize(fit_propensity_with(data, BoostedConfig{}, 0.01));
}
BENCHMARK(BM_BoostedPropensity)->Arg(1000)->Arg(4000)->Arg(16000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
