#include "koracle/pipeline_config.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

namespace koracle {
namespace {

uint64_t to_u64(const std::string& value, const std::string& key) {
  uint64_t out = 0;
  auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(key + ": bad unsigned integer '" + value + "'");
  }
  return out;
}

int to_int(const std::string& value, const std::string& key) {
  int out = 0;
  auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(key + ": bad integer '" + value + "'");
  }
  return out;
}

double to_double(const std::string& value, const std::string& key) {
  char* end = nullptr;
  double out = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty()) {
    throw ConfigError(key + ": bad number '" + value + "'");
  }
  return out;
}

bool to_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": bad bool '" + value + "' (true/false)");
}

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void set_config_key(PipelineConfig& config, const std::string& key,
                    const std::string& value) {
  if (key == "preprocess.window_len") {
    config.window_len = to_int(value, key);
  } else if (key == "preprocess.split_frac") {
    config.split_frac = to_double(value, key);
  } else if (key == "preprocess.threshold_ns") {
    config.threshold_ns = to_u64(value, key);
  } else if (key == "preprocess.inputs") {
    if (value == "intervals") {
      config.inputs = InputMode::intervals;
    } else if (value == "joint") {
      config.inputs = InputMode::joint;
    } else {
      throw ConfigError(key + ": expected intervals|joint, got '" + value +
                        "'");
    }
  } else if (key == "preprocess.include_idle") {
    config.include_idle = to_bool(value, key);
  } else if (key == "model.hidden") {
    config.hidden_dim = to_int(value, key);
  } else if (key == "model.layers") {
    config.num_layers = to_int(value, key);
  } else if (key == "train.epochs") {
    config.train.epochs = to_int(value, key);
  } else if (key == "train.optimizer") {
    if (value == "lbfgs") {
      config.train.optimizer = OptimizerKind::lbfgs;
    } else if (value == "sgd_momentum") {
      config.train.optimizer = OptimizerKind::sgd_momentum;
    } else if (value == "adaptive") {
      config.train.optimizer = OptimizerKind::adaptive;
    } else {
      throw ConfigError(key + ": expected lbfgs|sgd_momentum|adaptive");
    }
  } else if (key == "train.lbfgs_history") {
    config.train.lbfgs_history = to_int(value, key);
  } else if (key == "train.c1") {
    config.train.c1 = to_double(value, key);
  } else if (key == "train.backtrack") {
    config.train.backtrack = to_double(value, key);
  } else if (key == "train.max_line_search") {
    config.train.max_line_search = to_int(value, key);
  } else if (key == "train.learning_rate") {
    config.train.learning_rate = to_double(value, key);
  } else if (key == "train.lambda_task") {
    config.train.lambda_task = to_double(value, key);
  } else if (key == "train.patience") {
    config.train.patience = to_int(value, key);
  } else if (key == "train.seed") {
    config.train.seed = to_u64(value, key);
  } else if (key == "rollout.seed_len") {
    config.rollout_seed_len = to_int(value, key);
  } else if (key == "rollout.steps") {
    config.rollout_steps = to_int(value, key);
  } else if (key == "rollout.dump_epochs") {
    config.dump_epochs.clear();
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) config.dump_epochs.push_back(to_int(item, key));
    }
  } else if (key == "seed") {
    config.seed = to_u64(value, key);
    config.train.seed = config.seed;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

PipelineConfig parse_pipeline_config(const std::string& text) {
  PipelineConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    set_config_key(config, trim(trimmed.substr(0, eq)),
                   trim(trimmed.substr(eq + 1)));
  }
  validate_pipeline_config(config);
  return config;
}

void validate_pipeline_config(const PipelineConfig& config) {
  if (config.window_len < 2) {
    throw ConfigError("preprocess.window_len must be >= 2");
  }
  if (config.split_frac <= 0.0 || config.split_frac >= 1.0) {
    throw ConfigError("preprocess.split_frac must be in (0, 1)");
  }
  if (config.threshold_ns == 0) {
    throw ConfigError("preprocess.threshold_ns must be positive");
  }
  if (config.hidden_dim < 1) throw ConfigError("model.hidden must be >= 1");
  if (config.num_layers < 1) throw ConfigError("model.layers must be >= 1");
  if (config.rollout_seed_len < 1) {
    throw ConfigError("rollout.seed_len must be >= 1");
  }
  if (config.rollout_steps < 0) {
    throw ConfigError("rollout.steps must be >= 0");
  }
  for (int e : config.dump_epochs) {
    if (e < 1 || e > config.train.epochs) {
      throw ConfigError("rollout.dump_epochs entry " + std::to_string(e) +
                        " outside [1, epochs]");
    }
  }
  validate_train_config(config.train);
}

}  // namespace koracle
