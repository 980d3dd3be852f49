// google-benchmark views of the geometry kernel.

#include <benchmark/benchmark.h>

#include <cmath>

#include "hypermatch/hyperbolic.hpp"
#include "hypermatch/kernels.hpp"
#include "hypermatch/rng.hpp"
#include "hypermatch_bench/alloc_counter.hpp"

namespace {

using namespace hypermatch;

std::vector<double> random_vector(Rng& rng, std::size_t dim, double max_norm) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.gaussian(0.0, 1.0);
  const double n = kernels::norm(v);
  for (double& x : v) x = x / n * max_norm * (0.1 + 0.9 * rng.uniform());
  return v;
}

void BM_MobiusAddKernel(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  Rng rng(dim);
  const auto x = random_vector(rng, dim, 0.9), y = random_vector(rng, dim, 0.9);
  std::vector<double> out(dim);
  const auto before = bench::allocation_count();
  for (auto _ : state) {
    kernels::mobius_add(x, y, 1.0, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["allocs/op"] = benchmark::Counter(static_cast<double>(bench::allocation_count() - before),
                                                   benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_MobiusAddKernel)->Arg(8)->Arg(64)->Arg(768);

void BM_Distance(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  Rng rng(dim);
  const PoincarePoint x(random_vector(rng, dim, 0.9), Curvature(1.0)), y(random_vector(rng, dim, 0.9), Curvature(1.0));
  for (auto _ : state) benchmark::DoNotOptimize(poincare_distance(x, y));
}
BENCHMARK(BM_Distance)->Arg(8)->Arg(64)->Arg(768);

void BM_ExpLog(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  Rng rng(dim);
  const PoincarePoint x(random_vector(rng, dim, 0.9), Curvature(1.0));
  const TangentVector v(random_vector(rng, dim, 1.0), x);
  for (auto _ : state) {
    auto y = exp_map(x, v);
    benchmark::DoNotOptimize(log_map(x, y));
  }
}
BENCHMARK(BM_ExpLog)->Arg(8)->Arg(64)->Arg(768);

void BM_HyperAverage(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  Rng rng(dim + n);
  std::vector<PoincarePoint> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(random_vector(rng, dim, 0.9), Curvature(1.0));
  for (auto _ : state) benchmark::DoNotOptimize(hyper_average(pts));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_HyperAverage)->ArgsProduct({{8, 64, 768}, {1, 8, 64, 512}});

}  // namespace

BENCHMARK_MAIN();
