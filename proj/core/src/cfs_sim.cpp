#include "koracle/cfs_sim.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <set>
#include <sstream>

namespace koracle {
namespace {

constexpr uint64_t kNice0Weight = 1024;

// Exact vruntime comparison. With a fixed tick, vruntime_i is
// ticks_i * tick_ns * 1024 / weight_i, so ordering reduces to comparing
// ticks_i * weight_j against ticks_j * weight_i.
struct TaskState {
  const TaskSpec* spec;
  uint64_t ticks_run = 0;

  double vruntime_ns(uint64_t tick_ns) const {
    return double(ticks_run) * double(tick_ns) * double(kNice0Weight) /
           double(spec->weight);
  }
};

bool vruntime_less(const TaskState& a, const TaskState& b) {
  using u128 = unsigned __int128;
  u128 lhs = u128(a.ticks_run) * b.spec->weight;
  u128 rhs = u128(b.ticks_run) * a.spec->weight;
  if (lhs != rhs) return lhs < rhs;
  return a.spec->name < b.spec->name;
}

bool runnable_at(const TaskSpec& spec, uint64_t now_ns) {
  if (now_ns < spec.arrival_ns) return false;
  if (spec.behavior == TaskBehavior::cpu_bound) return true;
  uint64_t phase = (now_ns - spec.arrival_ns) % spec.period_ns;
  return phase < spec.burst_ns;
}

uint64_t parse_u64_field(const std::string& value, const std::string& line) {
  uint64_t out = 0;
  auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw InvalidWorkload("bad integer '" + value + "' in: " + line);
  }
  return out;
}

}  // namespace

void validate_workload(const std::vector<TaskSpec>& workload) {
  if (workload.empty()) throw InvalidWorkload("workload is empty");
  std::set<std::string> names;
  for (const TaskSpec& spec : workload) {
    if (spec.name.empty()) throw InvalidWorkload("task with empty name");
    if (spec.name == "idle") {
      throw InvalidWorkload("task name 'idle' is reserved");
    }
    if (spec.name.find(',') != std::string::npos ||
        spec.name.find('\n') != std::string::npos ||
        spec.name.find(' ') != std::string::npos) {
      throw InvalidWorkload("task name '" + spec.name +
                            "' contains ',', space or newline");
    }
    if (!names.insert(spec.name).second) {
      throw InvalidWorkload("duplicate task name '" + spec.name + "'");
    }
    if (spec.weight == 0) {
      throw InvalidWorkload("task '" + spec.name + "' has zero weight");
    }
    if (spec.behavior == TaskBehavior::periodic) {
      if (spec.period_ns == 0) {
        throw InvalidWorkload("task '" + spec.name + "' has zero period");
      }
      if (spec.burst_ns > spec.period_ns) {
        throw InvalidWorkload("task '" + spec.name + "': burst exceeds period");
      }
    }
  }
}

void validate_sim_config(const SimConfig& config) {
  if (config.tick_ns == 0) throw InvalidWorkload("tick_ns must be positive");
  if (config.duration_ns == 0) {
    throw InvalidWorkload("duration_ns must be positive");
  }
  if (config.tick_ns > config.duration_ns) {
    throw InvalidWorkload("tick_ns exceeds duration_ns");
  }
  if (config.jitter_ns >= config.tick_ns) {
    throw InvalidWorkload("jitter_ns must be smaller than tick_ns");
  }
}

SimResult simulate_detailed(const std::vector<TaskSpec>& workload,
                            const SimConfig& config) {
  validate_workload(workload);
  validate_sim_config(config);

  std::vector<TaskState> states;
  states.reserve(workload.size());
  for (const TaskSpec& spec : workload) states.push_back(TaskState{&spec});
  // Stable decision order regardless of input order.
  std::sort(states.begin(), states.end(),
            [](const TaskState& a, const TaskState& b) {
              return a.spec->name < b.spec->name;
            });

  std::mt19937_64 rng(config.seed);
  auto draw_jitter = [&]() -> int64_t {
    if (config.jitter_ns == 0) return 0;
    return int64_t(rng() % (config.jitter_ns + 1));
  };

  SimResult result;
  result.trace.origin_note = "cfs-sim";
  result.total_quanta = config.duration_ns / config.tick_ns;
  for (const TaskState& st : states) result.tick_counts[st.spec->name] = 0;

  const std::string idle_name = "idle";
  const std::string* running = nullptr;
  for (uint64_t q = 0; q < result.total_quanta; ++q) {
    const uint64_t now = q * config.tick_ns;

    TaskState* chosen = nullptr;
    double vr_min = 0.0, vr_max = 0.0;
    bool any_cpu_bound = false;
    for (TaskState& st : states) {
      if (!runnable_at(*st.spec, now)) continue;
      if (!chosen || vruntime_less(st, *chosen)) chosen = &st;
      if (st.spec->behavior == TaskBehavior::cpu_bound) {
        double vr = st.vruntime_ns(config.tick_ns);
        if (!any_cpu_bound) {
          vr_min = vr_max = vr;
          any_cpu_bound = true;
        } else {
          vr_min = std::min(vr_min, vr);
          vr_max = std::max(vr_max, vr);
        }
      }
    }
    if (any_cpu_bound) {
      result.max_vruntime_spread_ns =
          std::max(result.max_vruntime_spread_ns, vr_max - vr_min);
    }

    const std::string* next = chosen ? &chosen->spec->name : &idle_name;
    if (chosen) {
      chosen->ticks_run += 1;
      result.tick_counts[*next] += 1;
    } else {
      result.idle_ticks += 1;
    }
    if (!running || *running != *next) {
      result.trace.events.push_back(
          SchedEvent{int64_t(now) + draw_jitter(), 0, *next});
      running = next;
    }
  }
  validate_trace(result.trace);
  return result;
}

Trace simulate(const std::vector<TaskSpec>& workload, const SimConfig& config) {
  return simulate_detailed(workload, config).trace;
}

std::map<std::string, double> fairness_report(
    const Trace& trace, const std::vector<TaskSpec>& workload,
    uint64_t end_ns) {
  if (trace.empty()) throw EmptyTrace("fairness_report on empty trace");

  std::map<std::string, uint64_t> occupied;
  for (const TaskSpec& spec : workload) occupied[spec.name] = 0;
  uint64_t total = 0;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const SchedEvent& ev = trace.events[i];
    int64_t seg_end = i + 1 < trace.events.size()
                          ? trace.events[i + 1].timestamp_ns
                          : int64_t(end_ns);
    if (seg_end <= ev.timestamp_ns) continue;
    if (ev.task == "idle") continue;
    uint64_t span = uint64_t(seg_end - ev.timestamp_ns);
    occupied[ev.task] += span;
    total += span;
  }

  std::map<std::string, double> fractions;
  for (const auto& [name, ns] : occupied) {
    fractions[name] = total == 0 ? 0.0 : double(ns) / double(total);
  }
  return fractions;
}

std::vector<TaskSpec> parse_workload(const std::string& text) {
  std::vector<TaskSpec> workload;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string field;
    TaskSpec spec;
    bool has_name = false;
    bool has_any_field = false;
    while (fields >> field) {
      has_any_field = true;
      std::size_t eq = field.find('=');
      if (eq == std::string::npos) {
        throw InvalidWorkload("line " + std::to_string(line_no) +
                              ": expected key=value, got '" + field + "'");
      }
      std::string key = field.substr(0, eq);
      std::string value = field.substr(eq + 1);
      if (key == "name") {
        spec.name = value;
        has_name = true;
      } else if (key == "weight") {
        spec.weight = parse_u64_field(value, line);
      } else if (key == "arrival") {
        spec.arrival_ns = parse_u64_field(value, line);
      } else if (key == "behavior") {
        if (value == "cpu_bound") {
          spec.behavior = TaskBehavior::cpu_bound;
        } else if (value.rfind("periodic:", 0) == 0) {
          std::string rest = value.substr(9);
          std::size_t colon = rest.find(':');
          if (colon == std::string::npos) {
            throw InvalidWorkload("line " + std::to_string(line_no) +
                                  ": periodic needs <period>:<burst>");
          }
          spec.behavior = TaskBehavior::periodic;
          spec.period_ns = parse_u64_field(rest.substr(0, colon), line);
          spec.burst_ns = parse_u64_field(rest.substr(colon + 1), line);
        } else {
          throw InvalidWorkload("line " + std::to_string(line_no) +
                                ": unknown behavior '" + value + "'");
        }
      } else {
        throw InvalidWorkload("line " + std::to_string(line_no) +
                              ": unknown key '" + key + "'");
      }
    }
    if (!has_any_field) continue;  // blank or comment-only line
    if (!has_name) {
      throw InvalidWorkload("line " + std::to_string(line_no) +
                            ": task line without name=");
    }
    workload.push_back(std::move(spec));
  }
  validate_workload(workload);
  return workload;
}

}  // namespace koracle
