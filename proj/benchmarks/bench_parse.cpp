#include <benchmark/benchmark.h>

#include "koracle/cfs_sim.hpp"
#include "koracle/trace.hpp"

namespace {

void BM_ParseTrace(benchmark::State& state) {
  std::vector<koracle::TaskSpec> workload = {
      koracle::TaskSpec{"a", 2048, koracle::TaskBehavior::cpu_bound, 0, 0, 0},
      koracle::TaskSpec{"b", 1024, koracle::TaskBehavior::cpu_bound, 0, 0, 0},
  };
  koracle::SimConfig config;
  config.tick_ns = 1'000'000;
  config.duration_ns = uint64_t(state.range(0)) * config.tick_ns;
  std::string text = koracle::write_trace(koracle::simulate(workload, config));
  for (auto _ : state) {
    benchmark::DoNotOptimize(koracle::parse_trace(text));
  }
  state.SetBytesProcessed(int64_t(state.iterations()) * int64_t(text.size()));
}

void BM_ParsePerfMap(benchmark::State& state) {
  std::string text = "  A0 => nginx:1\n  B0 => ab:2\n";
  double ts = 0.0;
  char buf[64];
  for (int64_t i = 0; i < state.range(0); ++i) {
    ts += 0.000137;
    std::snprintf(buf, sizeof(buf), " *%s  %.6f secs\n",
                  i % 2 ? "B0" : "A0", ts);
    text += buf;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(koracle::parse_perf_map(text));
  }
  state.SetBytesProcessed(int64_t(state.iterations()) * int64_t(text.size()));
}

}  // namespace

BENCHMARK(BM_ParseTrace)->Arg(1000)->Arg(10000);
BENCHMARK(BM_ParsePerfMap)->Arg(1000)->Arg(10000);
