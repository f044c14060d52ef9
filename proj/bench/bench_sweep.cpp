#include <benchmark/benchmark.h>

#include "etdlab/harness.hpp"

namespace {

using namespace etdlab;

SweepGrid small_grid(Algorithm a) {
  SweepGrid g;
  g.specs = {make_spec(a, 2)};
  g.alphas = {0x1.0p-9, 0x1.0p-7, 0x1.0p-5};
  g.ns = {2};
  for (std::uint64_t s = 0; s < 8; ++s) g.seeds.push_back(s);
  g.steps = 5000;
  g.record_every = 100;
  return g;
}

void BM_SweepSerial(benchmark::State& state) {
  const EvalContext ctx = make_eval_context(make_collision());
  const SweepGrid grid = small_grid(Algorithm::netd);
  for (auto _ : state) benchmark::DoNotOptimize(sweep_serial(ctx, grid));
}
BENCHMARK(BM_SweepSerial)->Unit(benchmark::kMillisecond);

void BM_SweepParallel(benchmark::State& state) {
  const EvalContext ctx = make_eval_context(make_collision());
  const SweepGrid grid = small_grid(Algorithm::netd);
  for (auto _ : state) benchmark::DoNotOptimize(sweep(ctx, grid, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_SweepParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_LearnerStep(benchmark::State& state) {
  const EvalContext ctx = make_eval_context(make_baird());
  const auto alg = static_cast<Algorithm>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_evaluation(ctx, make_spec(alg, 5), 0x1.0p-12, 10000, 1, 1000));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_LearnerStep)
    ->Arg(static_cast<int>(Algorithm::nstep_td))
    ->Arg(static_cast<int>(Algorithm::netd))
    ->Arg(static_cast<int>(Algorithm::vtrace))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
