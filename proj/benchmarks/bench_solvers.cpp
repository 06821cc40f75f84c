#include <benchmark/benchmark.h>

#include "mpforge/problem.hpp"
#include "mpforge/solvers.hpp"

using namespace mpforge;

namespace {

ModelSpec probit() {
  ModelSpec m;
  m.prior = PriorSpec::bernoulli_gaussian(0.1, 1.0);
  m.channel = ChannelSpec::probit(0.01);
  m.law = SingularValueLaw::constant(1.0);
  m.delta = 0.5;
  return m;
}

SolverConfig ten_iterations() {
  SolverConfig c;
  c.max_iters = 10;
  c.stop_change_eps = 0.0;
  c.keep_x_hat = KeepPolicy::final_only;
  return c;
}

}  // namespace

static void BM_Vamp(benchmark::State& state) {
  ModelSpec m = probit();
  m.channel = ChannelSpec::awgn(0.01);
  ProblemInstance inst = sample_instance(m, state.range(0), 3, 0);
  SolverConfig cfg = ten_iterations();
  for (auto _ : state) benchmark::DoNotOptimize(run_vamp(inst, m.prior, cfg).final_x_hat.data());
}
BENCHMARK(BM_Vamp)->RangeMultiplier(2)->Range(512, 4096)->Unit(benchmark::kMillisecond);

static void BM_GvampProbit(benchmark::State& state) {
  ModelSpec m = probit();
  ProblemInstance inst = sample_instance(m, state.range(0), 4, 0);
  SolverConfig cfg = ten_iterations();
  for (auto _ : state) benchmark::DoNotOptimize(run_gvamp(inst, m.prior, m.channel, cfg).final_x_hat.data());
}
BENCHMARK(BM_GvampProbit)->RangeMultiplier(2)->Range(512, 4096)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
