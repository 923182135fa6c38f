#include <benchmark/benchmark.h>

#include <vector>

#include "chainstack/diagnostics.hpp"
#include "chainstack/psis.hpp"
#include "chainstack/rng.hpp"
#include "chainstack/stacking.hpp"

using namespace chainstack;

namespace {

std::vector<double> normal_series(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

void BM_SmoothColumn(benchmark::State& state) {
  const auto raw = normal_series(static_cast<std::size_t>(state.range(0)), 1);
  std::vector<double> ratios(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) ratios[i] = std::exp(raw[i]);
  for (auto _ : state) benchmark::DoNotOptimize(smooth_column(ratios));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SmoothColumn)->Arg(1000)->Arg(4000)->Arg(16000);

void BM_SplitRhat(benchmark::State& state) {
  const auto x = normal_series(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(split_rhat(x));
}
BENCHMARK(BM_SplitRhat)->Arg(4000)->Arg(32000);

void BM_ChainEss(benchmark::State& state) {
  const auto x = normal_series(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(chain_ess(x));
}
BENCHMARK(BM_ChainEss)->Arg(4000)->Arg(32000);

void BM_OptimizeWeights(benchmark::State& state) {
  const auto n = state.range(0);
  const auto k = state.range(1);
  CounterRng rng(4);
  Matrix log_loo(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double level = -2.0 + rng.normal();
    for (Eigen::Index j = 0; j < k; ++j) log_loo(i, j) = level + 1.5 * rng.normal();
  }
  const LooMatrix loo{log_loo, Matrix::Zero(n, k)};
  for (auto _ : state) benchmark::DoNotOptimize(optimize_weights(loo));
}
BENCHMARK(BM_OptimizeWeights)->Args({100, 2})->Args({1000, 8})->Args({2000, 16});

}  // namespace
BENCHMARK_MAIN();
