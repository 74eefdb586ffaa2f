#pragma once

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "koracle/cfs_sim.hpp"
#include "koracle/trace.hpp"

namespace testutil {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline fs::path data_path(const std::string& name) {
  return fs::path(KORACLE_DATA_DIR) / name;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& hint) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = fs::temp_directory_path() /
            ("koracle_" + hint + "_" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI binary with the given argument string.
inline CliResult run_cli(const std::string& args, const fs::path& scratch) {
  fs::path out_file = scratch / "cli_stdout.txt";
  fs::path err_file = scratch / "cli_stderr.txt";
  std::string cmd = std::string(KORACLE_BIN) + " " + args + " > " +
                    out_file.string() + " 2> " + err_file.string();
  int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_file(out_file);
  result.err = read_file(err_file);
  return result;
}

// Three cpu-bound tasks, weights 2:1:1. The heavy task sorts first, wins
// every all-way vruntime tie and holds the CPU for two consecutive ticks,
// so the switch intervals cycle 2,1,1 ticks and the delta stream has
// nonzero variance without jitter.
inline std::vector<koracle::TaskSpec> three_task_workload() {
  using koracle::TaskBehavior;
  return {
      koracle::TaskSpec{"aramis", 2048, TaskBehavior::cpu_bound, 0, 0, 0},
      koracle::TaskSpec{"bors", 1024, TaskBehavior::cpu_bound, 0, 0, 0},
      koracle::TaskSpec{"claudas", 1024, TaskBehavior::cpu_bound, 0, 0, 0},
  };
}

inline koracle::Trace three_task_trace(uint64_t ticks, uint64_t jitter_ns,
                                       uint64_t seed = 42) {
  koracle::SimConfig config;
  config.tick_ns = 1'000'000;
  config.duration_ns = ticks * config.tick_ns;
  config.jitter_ns = jitter_ns;
  config.seed = seed;
  return koracle::simulate(three_task_workload(), config);
}

}  // namespace testutil
