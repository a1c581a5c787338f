// Serial reference vs OpenMP kernels. Arg 0 selects Exec::Serial, 1
// Exec::Parallel; trial benchmarks take the job count as the argument.

#include <benchmark/benchmark.h>

#include "pqpow/backbone.hpp"
#include "pqpow/execution.hpp"
#include "pqpow/recording_sim.hpp"
#include "pqpow/verify.hpp"

using namespace pqpow;
using recording_sim::Exec;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

recording_sim::SystemConfig big_config() {
  recording_sim::SystemConfig c;
  c.m = 4;  // 2^16 oracle entries x 2^5 adversary states
  c.w = 0;
  c.p = 0.25;
  return c;
}

void BM_DualQuery(benchmark::State& state) {
  auto s = recording_sim::new_system(big_config());
  for (auto _ : state) recording_sim::apply_dual_query(s, exec_of(state));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.amplitudes().size()));
}

void BM_DomainRoundTrip(benchmark::State& state) {
  auto s = recording_sim::new_system(big_config());
  for (auto _ : state) {
    recording_sim::to_standard(s, exec_of(state));
    recording_sim::to_dual(s, exec_of(state));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.amplitudes().size()));
}

void BM_ProgressMeasure(benchmark::State& state) {
  auto s = recording_sim::new_system(big_config());
  recording_sim::apply_dual_query(s, Exec::Serial);
  for (auto _ : state) benchmark::DoNotOptimize(recording_sim::progress_measure(s, 2, exec_of(state)));
}

void BM_VerifyLemmas(benchmark::State& state) {
  recording_sim::VerifyGrid grid;
  grid.ms = {1, 2};
  grid.ps = {0.25};
  grid.n_max = 4;
  grid.k_max = 2;
  for (auto _ : state) benchmark::DoNotOptimize(recording_sim::verify_lemmas(grid, exec_of(state)).cases);
}

void BM_RunTrials(benchmark::State& state) {
  execution::ExecutionConfig c;
  c.n = 16;
  c.oracle = backbone::OracleParams::nearest(std::ldexp(1.0, -10), 48, 23, 1);
  c.rounds = 300;
  c.trials = 16;
  c.checks.s = 64;
  c.adversary.kind = execution::AdversaryKind::PrivateChain;
  c.adversary.mode = execution::RateMode::WorstCase;
  c.adversary.Q = 2;
  c.adversary.window = 64;
  for (auto _ : state) {
    benchmark::DoNotOptimize(execution::run_trials(c, static_cast<unsigned>(state.range(0))).trials.size());
  }
}

}  // namespace

BENCHMARK(BM_DualQuery)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DomainRoundTrip)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProgressMeasure)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VerifyLemmas)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunTrials)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
