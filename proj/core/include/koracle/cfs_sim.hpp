#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "koracle/trace.hpp"

namespace koracle {

enum class TaskBehavior { cpu_bound, periodic };

// One task in a synthetic workload. `weight` is the CFS-style relative
// share (nice-0 = 1024). Periodic tasks want the CPU for `burst_ns` at the
// start of every `period_ns`, measured from `arrival_ns`.
struct TaskSpec {
  std::string name;
  uint64_t weight = 1024;
  TaskBehavior behavior = TaskBehavior::cpu_bound;
  uint64_t period_ns = 0;
  uint64_t burst_ns = 0;
  uint64_t arrival_ns = 0;
};

struct SimConfig {
  uint64_t tick_ns = 1'000'000;
  uint64_t duration_ns = 1'000'000'000;
  uint64_t seed = 0;
  uint64_t jitter_ns = 0;
};

// Trace plus the per-task accounting the fairness properties are stated
// over. `max_vruntime_spread_ns` is the largest max-min vruntime gap seen
// over runnable cpu_bound tasks at any quantum boundary.
struct SimResult {
  Trace trace;
  std::map<std::string, uint64_t> tick_counts;
  uint64_t idle_ticks = 0;
  uint64_t total_quanta = 0;
  double max_vruntime_spread_ns = 0.0;
};

void validate_workload(const std::vector<TaskSpec>& workload);
void validate_sim_config(const SimConfig& config);

// Quantum-driven fair scheduler: at each tick boundary the runnable task
// with minimum vruntime runs (ties broken by smallest name) and its
// vruntime grows by tick_ns * 1024 / weight. Emits one event per change of
// the running task, including the first dispatch; "idle" runs when nothing
// is runnable. Event timestamps get deterministic seeded jitter in
// [0, jitter_ns]. Deterministic for a given (workload, config).
SimResult simulate_detailed(const std::vector<TaskSpec>& workload,
                            const SimConfig& config);
Trace simulate(const std::vector<TaskSpec>& workload, const SimConfig& config);

// Per-task share of non-idle time over [first event, end_ns). The final
// running segment is closed at end_ns, which callers take from the
// simulation duration.
std::map<std::string, double> fairness_report(
    const Trace& trace, const std::vector<TaskSpec>& workload,
    uint64_t end_ns);

// Workload description file: one task per line,
//   name=<s> [weight=<u>] [behavior=<cpu_bound|periodic:<period>:<burst>>]
//   [arrival=<u>]
// with '#' comments and blank lines allowed.
std::vector<TaskSpec> parse_workload(const std::string& text);

}  // namespace koracle
