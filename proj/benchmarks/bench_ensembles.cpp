#include <benchmark/benchmark.h>

#include "mpforge/ensembles.hpp"
#include "mpforge/rng.hpp"

using namespace mpforge;

static void BM_SampleRri(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Rng rng(1);
  for (auto _ : state) {
    auto fac = sample_rri_matrix(n / 2, n, SingularValueLaw::uniform(3.0), MatrixMode::orthogonally_invariant, rng);
    benchmark::DoNotOptimize(fac.s.data());
  }
}
BENCHMARK(BM_SampleRri)->RangeMultiplier(2)->Range(256, 2048)->Unit(benchmark::kMillisecond);

// one forward product through the stored factors
static void BM_ApplyFactorization(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Rng rng(2);
  auto fac = sample_rri_matrix(n / 2, n, SingularValueLaw::uniform(3.0), MatrixMode::orthogonally_invariant, rng);
  Eigen::VectorXd x = rng.normal_vector(n);
  for (auto _ : state) benchmark::DoNotOptimize(apply(fac, x));
}
BENCHMARK(BM_ApplyFactorization)->RangeMultiplier(2)->Range(256, 4096);

BENCHMARK_MAIN();
