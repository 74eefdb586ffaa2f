#include <doctest.h>

#include <random>

#include "koracle/cfs_sim.hpp"
#include "test_util.hpp"

using namespace koracle;

namespace {

// Independent tick-count oracle: straight loop over quantum boundaries
// with rational vruntime comparison, no event machinery.
std::map<std::string, uint64_t> reference_tick_counts(
    const std::vector<TaskSpec>& workload, uint64_t ticks) {
  std::map<std::string, uint64_t> counts;
  std::map<std::string, uint64_t> run;  // ticks run so far
  for (const TaskSpec& spec : workload) {
    counts[spec.name] = 0;
    run[spec.name] = 0;
  }
  for (uint64_t q = 0; q < ticks; ++q) {
    const TaskSpec* pick = nullptr;
    for (const TaskSpec& spec : workload) {
      if (!pick) {
        pick = &spec;
        continue;
      }
      // run/weight comparison via cross-multiplication
      unsigned __int128 lhs =
          (unsigned __int128)run[spec.name] * pick->weight;
      unsigned __int128 rhs =
          (unsigned __int128)run[pick->name] * spec.weight;
      if (lhs < rhs || (lhs == rhs && spec.name < pick->name)) pick = &spec;
    }
    run[pick->name] += 1;
    counts[pick->name] += 1;
  }
  return counts;
}

SimConfig ticks_config(uint64_t ticks) {
  SimConfig config;
  config.tick_ns = 1'000'000;
  config.duration_ns = ticks * config.tick_ns;
  return config;
}

}  // namespace

TEST_CASE("single cpu-bound task never switches") {
  std::vector<TaskSpec> workload = {
      TaskSpec{"solo", 1024, TaskBehavior::cpu_bound, 0, 0, 0}};
  Trace trace = simulate(workload, ticks_config(10));
  REQUIRE(trace.size() == 1);
  CHECK(trace.events[0] == SchedEvent{0, 0, "solo"});
}

TEST_CASE("two equal tasks alternate starting with the smaller name") {
  std::vector<TaskSpec> workload = {
      TaskSpec{"beta", 1024, TaskBehavior::cpu_bound, 0, 0, 0},
      TaskSpec{"alpha", 1024, TaskBehavior::cpu_bound, 0, 0, 0}};
  Trace trace = simulate(workload, ticks_config(10));
  REQUIRE(trace.size() == 10);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace.events[i].timestamp_ns == int64_t(i) * 1'000'000);
    CHECK(trace.events[i].task == (i % 2 == 0 ? "alpha" : "beta"));
  }
}

TEST_CASE("2:1 weights over 9 ticks give a 6/3 split") {
  std::vector<TaskSpec> workload = {
      TaskSpec{"heavy", 2048, TaskBehavior::cpu_bound, 0, 0, 0},
      TaskSpec{"light", 1024, TaskBehavior::cpu_bound, 0, 0, 0}};
  SimResult result = simulate_detailed(workload, ticks_config(9));
  CHECK(result.tick_counts.at("heavy") == 6);
  CHECK(result.tick_counts.at("light") == 3);

  auto oracle = reference_tick_counts(workload, 9);
  CHECK(oracle.at("heavy") == 6);
  CHECK(oracle.at("light") == 3);
}

TEST_CASE("tick counts match the reference loop on mixed weights") {
  std::mt19937_64 rng(11);
  const std::vector<uint64_t> weights = {512, 1024, 2048, 3072};
  for (int iter = 0; iter < 10; ++iter) {
    std::vector<TaskSpec> workload;
    const int n = 2 + int(rng() % 4);
    for (int i = 0; i < n; ++i) {
      workload.push_back(TaskSpec{"task" + std::to_string(i),
                                  weights[rng() % weights.size()],
                                  TaskBehavior::cpu_bound, 0, 0, 0});
    }
    const uint64_t ticks = 50 + rng() % 200;
    SimResult result = simulate_detailed(workload, ticks_config(ticks));
    CHECK(result.tick_counts == reference_tick_counts(workload, ticks));
  }
}

TEST_CASE("fairness_report fractions") {
  std::vector<TaskSpec> solo = {
      TaskSpec{"solo", 1024, TaskBehavior::cpu_bound, 0, 0, 0}};
  Trace trace = simulate(solo, ticks_config(10));
  auto report = fairness_report(trace, solo, 10'000'000);
  CHECK(report.at("solo") == doctest::Approx(1.0));

  std::vector<TaskSpec> pair = {
      TaskSpec{"alpha", 1024, TaskBehavior::cpu_bound, 0, 0, 0},
      TaskSpec{"beta", 1024, TaskBehavior::cpu_bound, 0, 0, 0}};
  const uint64_t ticks = 1000;
  Trace fair = simulate(pair, ticks_config(ticks));
  auto fractions = fairness_report(fair, pair, ticks * 1'000'000);
  const double tol = 1.0 / double(ticks);
  CHECK(fractions.at("alpha") == doctest::Approx(0.5).epsilon(tol));
  CHECK(fractions.at("beta") == doctest::Approx(0.5).epsilon(tol));
  CHECK(fractions.at("alpha") + fractions.at("beta") ==
        doctest::Approx(1.0).epsilon(1e-9));

  std::vector<TaskSpec> weighted = {
      TaskSpec{"heavy", 2048, TaskBehavior::cpu_bound, 0, 0, 0},
      TaskSpec{"light", 1024, TaskBehavior::cpu_bound, 0, 0, 0}};
  Trace skewed = simulate(weighted, ticks_config(ticks));
  auto skew = fairness_report(skewed, weighted, ticks * 1'000'000);
  CHECK(skew.at("heavy") == doctest::Approx(2.0 / 3.0).epsilon(tol));
  CHECK(skew.at("light") == doctest::Approx(1.0 / 3.0).epsilon(tol));

  CHECK_THROWS_AS(fairness_report(Trace{}, solo, 1), EmptyTrace);
}

TEST_CASE("determinism: identical inputs give byte-identical traces") {
  SimConfig config = ticks_config(200);
  config.jitter_ns = 100'000;
  config.seed = 99;
  auto workload = testutil::three_task_workload();
  std::string a = write_trace(simulate(workload, config));
  std::string b = write_trace(simulate(workload, config));
  CHECK(a == b);
}

TEST_CASE("seed changes jitter but not the task order") {
  SimConfig config = ticks_config(100);
  config.jitter_ns = 200'000;
  config.seed = 1;
  auto workload = testutil::three_task_workload();
  Trace first = simulate(workload, config);
  config.seed = 2;
  Trace second = simulate(workload, config);
  REQUIRE(first.size() == second.size());
  bool any_ts_differs = false;
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first.events[i].task == second.events[i].task);
    any_ts_differs |=
        first.events[i].timestamp_ns != second.events[i].timestamp_ns;
  }
  CHECK(any_ts_differs);
}

TEST_CASE("equal-weight tick counts differ by at most one") {
  std::mt19937_64 rng(3);
  for (int iter = 0; iter < 5; ++iter) {
    std::vector<TaskSpec> workload;
    const int n = 2 + int(rng() % 5);
    for (int i = 0; i < n; ++i) {
      workload.push_back(TaskSpec{"eq" + std::to_string(i), 1024,
                                  TaskBehavior::cpu_bound, 0, 0, 0});
    }
    const uint64_t ticks = 100 + rng() % 500;
    SimResult result = simulate_detailed(workload, ticks_config(ticks));
    uint64_t lo = UINT64_MAX, hi = 0;
    for (const auto& [name, count] : result.tick_counts) {
      lo = std::min(lo, count);
      hi = std::max(hi, count);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("conservation: occupied plus idle ticks cover the run") {
  std::vector<TaskSpec> workload = {
      TaskSpec{"burst", 1024, TaskBehavior::periodic, 4'000'000, 2'000'000, 0},
      TaskSpec{"late", 1024, TaskBehavior::cpu_bound, 0, 0, 50'000'000}};
  SimResult result = simulate_detailed(workload, ticks_config(100));
  uint64_t occupied = 0;
  for (const auto& [name, count] : result.tick_counts) occupied += count;
  CHECK(occupied + result.idle_ticks == result.total_quanta);
  CHECK(result.total_quanta == 100);
  CHECK(result.idle_ticks > 0);  // before `late` arrives, half the ticks idle
}

TEST_CASE("vruntime spread stays under one max increment") {
  std::mt19937_64 rng(17);
  for (int iter = 0; iter < 5; ++iter) {
    std::vector<TaskSpec> workload;
    const int n = 2 + int(rng() % 4);
    uint64_t min_weight = UINT64_MAX;
    for (int i = 0; i < n; ++i) {
      uint64_t w = 512 << (rng() % 3);
      min_weight = std::min(min_weight, w);
      workload.push_back(TaskSpec{"task" + std::to_string(i), w,
                                  TaskBehavior::cpu_bound, 0, 0, 0});
    }
    SimConfig config = ticks_config(300);
    SimResult result = simulate_detailed(workload, config);
    const double bound =
        double(config.tick_ns) * 1024.0 / double(min_weight);
    CHECK(result.max_vruntime_spread_ns <= bound + 1e-9);
  }
}

TEST_CASE("workload and config validation") {
  CHECK_THROWS_AS(simulate({}, ticks_config(10)), InvalidWorkload);
  CHECK_THROWS_AS(
      simulate({TaskSpec{"a", 0, TaskBehavior::cpu_bound, 0, 0, 0}},
               ticks_config(10)),
      InvalidWorkload);
  CHECK_THROWS_AS(
      simulate({TaskSpec{"a", 1024, TaskBehavior::cpu_bound, 0, 0, 0},
                TaskSpec{"a", 1024, TaskBehavior::cpu_bound, 0, 0, 0}},
               ticks_config(10)),
      InvalidWorkload);
  CHECK_THROWS_AS(
      simulate({TaskSpec{"idle", 1024, TaskBehavior::cpu_bound, 0, 0, 0}},
               ticks_config(10)),
      InvalidWorkload);
  CHECK_THROWS_AS(
      simulate({TaskSpec{"p", 1024, TaskBehavior::periodic, 10, 20, 0}},
               ticks_config(10)),
      InvalidWorkload);

  SimConfig bad = ticks_config(10);
  bad.jitter_ns = bad.tick_ns;  // jitter must stay below one tick
  CHECK_THROWS_AS(
      simulate({TaskSpec{"a", 1024, TaskBehavior::cpu_bound, 0, 0, 0}}, bad),
      InvalidWorkload);
}

TEST_CASE("parse_workload") {
  auto workload = parse_workload(
      "# comment\n"
      "name=web weight=2048 behavior=cpu_bound arrival=0\n"
      "\n"
      "name=cron behavior=periodic:1000000:250000  # trailing comment\n");
  REQUIRE(workload.size() == 2);
  CHECK(workload[0].name == "web");
  CHECK(workload[0].weight == 2048);
  CHECK(workload[1].name == "cron");
  CHECK(workload[1].weight == 1024);  // default
  CHECK(workload[1].behavior == TaskBehavior::periodic);
  CHECK(workload[1].period_ns == 1'000'000);
  CHECK(workload[1].burst_ns == 250'000);

  CHECK_THROWS_AS(parse_workload("weight=1\n"), InvalidWorkload);
  CHECK_THROWS_AS(parse_workload("name=x behavior=sometimes\n"),
                  InvalidWorkload);
  CHECK_THROWS_AS(parse_workload("name=x nonsense\n"), InvalidWorkload);
}
