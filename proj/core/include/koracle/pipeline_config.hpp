#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "koracle/preprocess.hpp"
#include "koracle/trainer.hpp"

namespace koracle {

// All pipeline defaults in one reproducible place. Loaded from a
// line-oriented `key = value` file with '#' comments; CLI flags override.
struct PipelineConfig {
  // preprocess.*
  int window_len = 100;
  double split_frac = 0.8;
  uint64_t threshold_ns = 1'000'000'000;
  InputMode inputs = InputMode::joint;
  bool include_idle = true;

  // model.*
  int hidden_dim = 51;
  int num_layers = 2;

  // train.* (train.seed mirrors the global seed unless set explicitly)
  TrainConfig train;

  // rollout.*
  int rollout_seed_len = 1200;
  int rollout_steps = 1000;
  std::vector<int> dump_epochs;  // per-epoch checkpoints to write

  // global
  uint64_t seed = 42;

  PreprocessOptions preprocess_options() const {
    return PreprocessOptions{threshold_ns, split_frac, window_len,
                             include_idle, inputs};
  }
};

// Applies one namespaced key. Throws ConfigError on unknown keys or values
// outside the owning module's ranges.
void set_config_key(PipelineConfig& config, const std::string& key,
                    const std::string& value);

PipelineConfig parse_pipeline_config(const std::string& text);

void validate_pipeline_config(const PipelineConfig& config);

}  // namespace koracle
