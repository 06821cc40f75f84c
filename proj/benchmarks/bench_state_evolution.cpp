#include <benchmark/benchmark.h>

#include "mpforge/general_se.hpp"
#include "mpforge/state_evolution.hpp"

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

}  // namespace

static void BM_QuadratureSe(benchmark::State& state) {
  ModelSpec m = probit();
  SolverConfig cfg;
  SEOptions opts;
  opts.nodes = static_cast<int>(state.range(0));
  opts.check_doubling = false;
  for (auto _ : state) benchmark::DoNotOptimize(run_se_gvamp(m, se_init(m, cfg), 10, cfg, opts).steps.back());
}
BENCHMARK(BM_QuadratureSe)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_MonteCarloSe(benchmark::State& state) {
  ModelSpec m = probit();
  SolverConfig cfg;
  GeneralSeOptions opts;
  opts.mc_samples = static_cast<std::size_t>(state.range(0));
  GeneralSeModel gm = GeneralSeModel::from(m, GeneralKind::gvamp);
  for (auto _ : state) benchmark::DoNotOptimize(run_se_general(gm, se_init(m, cfg), 10, cfg, opts).steps.back());
}
BENCHMARK(BM_MonteCarloSe)->Arg(20000)->Arg(200000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
