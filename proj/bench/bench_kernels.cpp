// Serial reference vs OpenMP kernels at realistic shapes (K models x N texts).

#include <benchmark/benchmark.h>
#include <omp.h>

#include "llmap/kernels.hpp"
#include "llmap/rng.hpp"

namespace {

llmap::Matrix make(Eigen::Index k, Eigen::Index n) {
  llmap::SplitMix64 rng(17);
  llmap::Matrix m(k, n);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = -300.0 + 50.0 * rng.normal();
  }
  return m;
}

template <auto Kernel>
void run(benchmark::State& state) {
  const auto m = make(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(m));
  state.counters["threads"] = omp_get_max_threads();
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 2000})->Args({512, 4000})->Args({1024, 10000})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(run<llmap::kernels::serial::double_center>)->Name("double_center/serial")->Apply(shapes);
BENCHMARK(run<llmap::kernels::parallel::double_center>)->Name("double_center/parallel")->Apply(shapes);
BENCHMARK(run<llmap::kernels::serial::pairwise_sq_dist>)->Name("pairwise_sq_dist/serial")->Apply(shapes);
BENCHMARK(run<llmap::kernels::parallel::pairwise_sq_dist>)->Name("pairwise_sq_dist/parallel")->Apply(shapes);
BENCHMARK(run<llmap::kernels::serial::gram>)->Name("gram/serial")->Apply(shapes);
BENCHMARK(run<llmap::kernels::parallel::gram>)->Name("gram/parallel")->Apply(shapes);

BENCHMARK_MAIN();
