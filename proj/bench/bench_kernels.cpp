// Serial reference kernels against their OpenMP counterparts.

#include <cmath>

#include <benchmark/benchmark.h>

#include "warmup/kernels.hpp"
#include "warmup/random.hpp"

using namespace warmup;

namespace {

constexpr std::size_t kDim = 384;

std::vector<float> tokens(std::size_t count) {
  Rng rng(1);
  std::vector<float> t(count * kDim);
  for (auto& x : t) x = static_cast<float>(rng.normal());
  return t;
}

RowMatrix matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrix m(rows, cols);
  for (auto& x : m.data) x = rng.normal();
  return m;
}

template <bool Parallel>
void BM_Covariance(benchmark::State& state) {
  const auto t = tokens(static_cast<std::size_t>(state.range(0)));
  const auto mean = kernels::serial::token_mean(t, kDim);
  for (auto _ : state) {
    auto c = Parallel ? kernels::omp::token_covariance(t, kDim, mean) : kernels::serial::token_covariance(t, kDim, mean);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Project(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto t = tokens(n);
  const auto mean = kernels::serial::token_mean(t, kDim);
  std::vector<double> dir(kDim, 1.0 / std::sqrt(static_cast<double>(kDim))), out(n);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::omp::project(t, kDim, mean, dir, out);
    else kernels::serial::project(t, kDim, mean, dir, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Nearest(benchmark::State& state) {
  const auto pts = matrix(static_cast<std::size_t>(state.range(0)), kDim, 2);
  const auto cents = matrix(256, kDim, 3);
  for (auto _ : state) {
    auto r = Parallel ? kernels::omp::nearest(pts, cents) : kernels::serial::nearest(pts, cents);
    benchmark::DoNotOptimize(r.label.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Softmin(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<double> s(n), w(n);
  for (auto& x : s) x = rng.uniform();
  for (auto _ : state) {
    const double total =
        Parallel ? kernels::omp::softmin_weights(s, 0.0, 0.1, w) : kernels::serial::softmin_weights(s, 0.0, 0.1, w);
    for (auto& x : w) x /= total;
    benchmark::DoNotOptimize(Parallel ? kernels::omp::expected_distinct(w, static_cast<double>(n))
                                      : kernels::serial::expected_distinct(w, static_cast<double>(n)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Covariance<false>)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Covariance<true>)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Project<false>)->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Project<true>)->Arg(200000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Nearest<false>)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Nearest<true>)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Softmin<false>)->Arg(1000000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Softmin<true>)->Arg(1000000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
