#include "koracle/trace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace koracle {
namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

uint64_t parse_uint(const std::string& tok, std::size_t line_no,
                    const char* what) {
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw MalformedLine(line_no, std::string("bad ") + what + " '" + tok + "'");
  }
  return value;
}

void validate_task_name(const std::string& name, std::size_t line_no) {
  if (name.empty()) throw MalformedLine(line_no, "empty task name");
  if (name.find(',') != std::string::npos ||
      name.find('\n') != std::string::npos) {
    throw MalformedLine(line_no, "task name contains ',' or newline: '" +
                                     name + "'");
  }
}

}  // namespace

void ShortcodeTable::define(const std::string& code, const std::string& name,
                            std::size_t line_no) {
  if (name.empty()) throw MalformedLine(line_no, "empty name for code " + code);
  auto it = by_code_.find(code);
  if (it != by_code_.end()) {
    if (it->second != name) {
      throw MalformedLine(line_no, "code " + code + " redefined from '" +
                                       it->second + "' to '" + name + "'");
    }
    return;
  }
  auto nit = by_name_.find(name);
  if (nit != by_name_.end() && nit->second != code) {
    throw MalformedLine(line_no, "name '" + name + "' already mapped to code " +
                                     nit->second);
  }
  by_code_[code] = name;
  by_name_[name] = code;
}

std::optional<std::string> ShortcodeTable::lookup(
    const std::string& code) const {
  if (code == ".") return "idle";
  auto it = by_code_.find(code);
  if (it == by_code_.end()) return std::nullopt;
  return it->second;
}

void validate_trace(const Trace& trace) {
  int64_t prev_ts = -1;
  std::optional<int> cpu;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const SchedEvent& ev = trace.events[i];
    if (ev.timestamp_ns < 0) {
      throw NonMonotonicTimestamp("negative timestamp at event " +
                                  std::to_string(i));
    }
    if (ev.timestamp_ns < prev_ts) {
      throw NonMonotonicTimestamp(
          "timestamp decreases at event " + std::to_string(i) + " (" +
          std::to_string(ev.timestamp_ns) + " < " + std::to_string(prev_ts) +
          ")");
    }
    prev_ts = ev.timestamp_ns;
    if (!cpu) {
      cpu = ev.cpu;
    } else if (*cpu != ev.cpu) {
      throw MixedCpu("events on cpu " + std::to_string(*cpu) + " and cpu " +
                     std::to_string(ev.cpu));
    }
    validate_task_name(ev.task, i + 2);  // +2: header line + 1-based
  }
}

int64_t seconds_text_to_ns(const std::string& text, std::size_t line_no) {
  if (text.empty()) throw MalformedLine(line_no, "empty timestamp");
  std::size_t dot = text.find('.');
  std::string int_part = dot == std::string::npos ? text : text.substr(0, dot);
  std::string frac = dot == std::string::npos ? "" : text.substr(dot + 1);
  if (int_part.empty()) int_part = "0";
  for (const std::string* part : {&int_part, &frac}) {
    for (char c : *part) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        throw MalformedLine(line_no, "bad timestamp '" + text + "'");
      }
    }
  }
  uint64_t secs = parse_uint(int_part, line_no, "timestamp");
  // Nanoseconds from up to 9 fractional digits; the 10th digit rounds
  // half-up, anything past it only matters through that digit.
  uint64_t frac_ns = 0;
  for (std::size_t i = 0; i < 9; ++i) {
    frac_ns = frac_ns * 10 + (i < frac.size() ? uint64_t(frac[i] - '0') : 0);
  }
  if (frac.size() > 9 && frac[9] >= '5') frac_ns += 1;
  if (secs > uint64_t(INT64_MAX / 1000000000LL)) {
    throw MalformedLine(line_no, "timestamp overflow '" + text + "'");
  }
  return int64_t(secs) * 1000000000LL + int64_t(frac_ns);
}

Trace parse_perf_map(const std::string& text, std::optional<int> cpu_select) {
  ShortcodeTable table;
  Trace trace;
  trace.origin_note = "perf-sched-map";
  const std::vector<std::string> lines = split_lines(text);
  int64_t prev_ts = -1;
  for (std::size_t idx = 0; idx < lines.size(); ++idx) {
    const std::size_t line_no = idx + 1;
    const std::string& line = lines[idx];
    if (is_blank(line)) continue;
    std::vector<std::string> tokens = tokenize(line);

    // Mapping line: <code> => <name>
    if (tokens.size() == 3 && tokens[1] == "=>") {
      validate_task_name(tokens[2], line_no);
      table.define(tokens[0], tokens[2], line_no);
      continue;
    }

    // Timeline line: one column token per cpu, then "<float> secs".
    if (tokens.size() >= 3 && tokens.back() == "secs") {
      std::vector<std::string> columns(tokens.begin(), tokens.end() - 2);
      for (std::string& col : columns) {
        if (!col.empty() && col[0] == '*') col.erase(0, 1);
        if (col.empty()) throw MalformedLine(line_no, "empty column token");
      }
      int col_index = 0;
      if (columns.size() != 1) {
        if (!cpu_select) {
          throw MixedCpu("line " + std::to_string(line_no) + ": " +
                         std::to_string(columns.size()) +
                         " cpu columns; single-cpu input required "
                         "(select one column to keep)");
        }
        col_index = *cpu_select;
        if (col_index < 0 || std::size_t(col_index) >= columns.size()) {
          throw MalformedLine(line_no,
                              "cpu column " + std::to_string(col_index) +
                                  " out of range (line has " +
                                  std::to_string(columns.size()) + ")");
        }
      } else if (cpu_select && *cpu_select != 0) {
        throw MalformedLine(line_no, "cpu column " +
                                         std::to_string(*cpu_select) +
                                         " out of range (line has 1)");
      }
      const std::string& code = columns[std::size_t(col_index)];
      std::optional<std::string> name = table.lookup(code);
      if (!name) {
        throw UnknownShortcode("line " + std::to_string(line_no) +
                               ": shortcode '" + code + "' never defined");
      }
      int64_t ts = seconds_text_to_ns(tokens[tokens.size() - 2], line_no);
      if (ts < prev_ts) {
        throw NonMonotonicTimestamp("line " + std::to_string(line_no) +
                                    ": timestamp goes backwards");
      }
      prev_ts = ts;
      trace.events.push_back(
          SchedEvent{ts, cpu_select ? *cpu_select : 0, *name});
      continue;
    }

    throw MalformedLine(line_no, "neither mapping nor timeline line: '" +
                                     line + "'");
  }
  validate_trace(trace);
  return trace;
}

std::string write_trace(const Trace& trace) {
  std::string out = "timestamp_ns,cpu,task\n";
  for (const SchedEvent& ev : trace.events) {
    out += std::to_string(ev.timestamp_ns);
    out += ',';
    out += std::to_string(ev.cpu);
    out += ',';
    out += ev.task;
    out += '\n';
  }
  return out;
}

Trace parse_trace(const std::string& text) {
  const std::vector<std::string> lines = split_lines(text);
  if (lines.empty() || lines[0] != "timestamp_ns,cpu,task") {
    throw MalformedLine(1, "missing canonical header 'timestamp_ns,cpu,task'");
  }
  Trace trace;
  trace.origin_note = "canonical";
  for (std::size_t idx = 1; idx < lines.size(); ++idx) {
    const std::size_t line_no = idx + 1;
    const std::string& line = lines[idx];
    if (line.empty()) continue;
    std::size_t c1 = line.find(',');
    std::size_t c2 = c1 == std::string::npos ? std::string::npos
                                             : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw MalformedLine(line_no, "expected 3 comma-separated fields");
    }
    uint64_t ts = parse_uint(line.substr(0, c1), line_no, "timestamp_ns");
    uint64_t cpu = parse_uint(line.substr(c1 + 1, c2 - c1 - 1), line_no, "cpu");
    std::string task = line.substr(c2 + 1);
    validate_task_name(task, line_no);
    if (ts > uint64_t(INT64_MAX) || cpu > uint64_t(INT32_MAX)) {
      throw MalformedLine(line_no, "field out of range");
    }
    trace.events.push_back(SchedEvent{int64_t(ts), int(cpu), std::move(task)});
  }
  validate_trace(trace);
  return trace;
}

std::map<std::string, uint64_t> schedule_counts(const Trace& trace) {
  std::map<std::string, uint64_t> counts;
  for (const SchedEvent& ev : trace.events) counts[ev.task] += 1;
  return counts;
}

}  // namespace koracle
