#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "koracle/errors.hpp"

namespace koracle {

// One scheduling decision on one CPU.
struct SchedEvent {
  int64_t timestamp_ns = 0;
  int cpu = 0;
  std::string task;

  friend bool operator==(const SchedEvent&, const SchedEvent&) = default;
};

// Ordered single-CPU schedule. Timestamps are non-decreasing and every
// event carries the same cpu index.
struct Trace {
  std::vector<SchedEvent> events;
  std::string origin_note;

  bool empty() const { return events.empty(); }
  std::size_t size() const { return events.size(); }
};

// Shortcode ("A0") -> full task name ("nginx:1234"), as accumulated from
// the mapping lines of a sched map dump. Injective; the idle marker "."
// is implicit and never stored.
class ShortcodeTable {
 public:
  // Throws MalformedLine if the code is redefined to a different name or
  // another code already owns `name`.
  void define(const std::string& code, const std::string& name,
              std::size_t line_no);
  std::optional<std::string> lookup(const std::string& code) const;
  std::size_t size() const { return by_code_.size(); }

 private:
  std::map<std::string, std::string> by_code_;
  std::map<std::string, std::string> by_name_;
};

void validate_trace(const Trace& trace);

// Parses single-CPU `perf sched map`-style text. Two line kinds are
// supported:
//
//   mapping line:   <code> => <name>
//   timeline line:  [*]<code>  <float> secs
//
// Anything else is MalformedLine. Timeline timestamps are seconds with a
// fractional part and are converted to integer nanoseconds, rounding
// half-up. The idle marker "." resolves to the task name "idle"; every
// other code must have been defined by an earlier mapping line.
//
// Multi-column (multi-CPU) timeline lines are rejected unless `cpu_select`
// names the column to keep; the emitted events then carry that cpu index.
Trace parse_perf_map(const std::string& text,
                     std::optional<int> cpu_select = std::nullopt);

// Canonical trace format: header `timestamp_ns,cpu,task`, then one
// comma-separated row per event, '\n' line endings.
std::string write_trace(const Trace& trace);
Trace parse_trace(const std::string& text);

std::map<std::string, uint64_t> schedule_counts(const Trace& trace);

// Exact decimal seconds -> nanoseconds, rounding half-up on the 10th
// fractional digit. `text` must look like [0-9]+(.[0-9]+)?.
int64_t seconds_text_to_ns(const std::string& text, std::size_t line_no);

}  // namespace koracle
