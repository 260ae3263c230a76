#include <benchmark/benchmark.h>

#include "tailcut/accuracy.hpp"
#include "tailcut/dataset.hpp"
#include "tailcut/em.hpp"
#include "tailcut/kmeans.hpp"
#include "tailcut/random.hpp"
#include "tailcut/regression.hpp"

using namespace tailcut;

namespace {

SynthSpec mixture(std::size_t n) {
  const double corners[4][4] = {{0, 0, 0, 0}, {1, 1, 0, 0}, {0, 1, 1, 0}, {1, 0, 1, 1}};
  SynthSpec spec;
  spec.n_points = n;
  spec.dim = 4;
  for (const auto& corner : corners) {
    MixtureComponent c;
    for (double v : corner) {
      c.mean.push_back(2.0 * v);
      c.stddev.push_back(1.0);
    }
    c.weight = 0.25;
    spec.components.push_back(c);
  }
  return spec;
}

void BM_RandIndex(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Labels a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = static_cast<Label>(rng.uniform_index(8));
    b[i] = static_cast<Label>(rng.uniform_index(8));
  }
  for (auto _ : state) benchmark::DoNotOptimize(rand_index(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_RandIndex)->Range(1 << 10, 1 << 20);

void BM_RandIndexNaive(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Labels a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = static_cast<Label>(rng.uniform_index(8));
    b[i] = static_cast<Label>(rng.uniform_index(8));
  }
  for (auto _ : state) benchmark::DoNotOptimize(rand_index_naive(a, b));
}
BENCHMARK(BM_RandIndexNaive)->Range(1 << 6, 1 << 12);

void BM_KMeansRun(benchmark::State& state) {
  const auto ds = generate_synthetic(mixture(static_cast<std::size_t>(state.range(0))), 3);
  KMeansConfig cfg;
  cfg.k = 4;
  cfg.seed = 5;
  for (auto _ : state) benchmark::DoNotOptimize(run_kmeans(ds, cfg).trace.iterations());
}
BENCHMARK(BM_KMeansRun)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_EMRun(benchmark::State& state) {
  const auto ds = generate_synthetic(mixture(static_cast<std::size_t>(state.range(0))), 3);
  EMConfig cfg;
  cfg.k = 4;
  cfg.seed = 5;
  for (auto _ : state) benchmark::DoNotOptimize(run_em(ds, cfg).trace.iterations());
}
BENCHMARK(BM_EMRun)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_FitQuadratic(benchmark::State& state) {
  Rng rng(2);
  TrainingPairs pairs;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    const double r = 0.3 + 0.7 * rng.uniform01();
    pairs.pairs.push_back({r, 1.83 - 3.66 * r + 1.83 * r * r + 1e-3 * rng.normal()});
    pairs.provenance.push_back({0, static_cast<std::size_t>(i) + 2});
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_quadratic(pairs).beta2);
}
BENCHMARK(BM_FitQuadratic)->Range(16, 1 << 14);

}  // namespace

BENCHMARK_MAIN();
