#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "koracle/lbfgs.hpp"
#include "koracle/lstm.hpp"
#include "koracle/preprocess.hpp"

namespace koracle {

enum class OptimizerKind { lbfgs, sgd_momentum, adaptive };

struct TrainConfig {
  int epochs = 30;
  OptimizerKind optimizer = OptimizerKind::lbfgs;
  int lbfgs_history = 10;
  double c1 = 1e-4;
  double backtrack = 0.5;
  int max_line_search = 20;
  double learning_rate = 0.1;
  uint64_t seed = 42;
  double lambda_task = 0.0;
  int patience = 0;  // 0 disables early stopping
};

void validate_train_config(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_loss = 0.0;
  double grad_norm = 0.0;
  double step_size = 0.0;
  bool line_search_fallback = false;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  int best_epoch = 0;  // epoch with minimal test loss

  double best_test_loss() const;
};

// `epoch,train_loss,test_loss,grad_norm,step_size` text table.
std::string write_history(const TrainHistory& history);
TrainHistory parse_history(const std::string& text);

// Sample windows baked into model tensors once.
struct WindowBatch {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<StepTargets> targets;

  static WindowBatch from(const SampleSet& set, InputMode mode,
                          int vocab_size);
  std::size_t size() const { return inputs.size(); }
};

double evaluate(const LstmParams& params, const WindowBatch& test,
                double lambda_task);
double evaluate(const LstmParams& params, const SampleSet& test,
                double lambda_task);

// Called with the parameters at the end of every epoch (1-based).
using EpochObserver = std::function<void(int epoch, const LstmParams&)>;

// L-BFGS: one full-batch iteration per epoch. Descent optimizers: one pass
// over the windows per epoch. Returns the parameters from the best
// test-loss epoch plus per-epoch history; deterministic for fixed
// (initial params, data, config).
std::pair<TrainedModel, TrainHistory> train(
    const LstmParams& init, const SampleSet& train_set,
    const SampleSet& test_set, const NormStats& stats,
    const TrainConfig& config, const EpochObserver& observer = {});

}  // namespace koracle
