#include <benchmark/benchmark.h>

#include "koracle/cfs_sim.hpp"

namespace {

void BM_SimulateCpuBound(benchmark::State& state) {
  std::vector<koracle::TaskSpec> workload;
  for (int i = 0; i < int(state.range(0)); ++i) {
    workload.push_back(koracle::TaskSpec{
        "task" + std::to_string(i), uint64_t(1024 << (i % 3)),
        koracle::TaskBehavior::cpu_bound, 0, 0, 0});
  }
  koracle::SimConfig config;
  config.tick_ns = 1'000'000;
  config.duration_ns = 10'000 * config.tick_ns;
  config.jitter_ns = 100'000;
  config.seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(koracle::simulate(workload, config));
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * 10'000);
}

}  // namespace

BENCHMARK(BM_SimulateCpuBound)->Arg(2)->Arg(8)->Arg(32);
