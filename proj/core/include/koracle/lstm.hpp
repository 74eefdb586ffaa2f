#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koracle/errors.hpp"
#include "koracle/preprocess.hpp"

namespace koracle {

// One LSTM layer. Gate rows are packed [input i, forget f, cell g,
// output o], H rows each.
struct LayerParams {
  Eigen::MatrixXd w_x;  // 4H x D_in (D_in = input_dim for layer 0, else H)
  Eigen::MatrixXd w_h;  // 4H x H
  Eigen::VectorXd b;    // 4H
};

struct LstmParams {
  int input_dim = 0;   // D
  int hidden_dim = 0;  // H
  int vocab_size = 0;  // V; the task head emits V+1 logits (<UNK> + names)
  std::vector<LayerParams> layers;
  Eigen::MatrixXd task_w;         // (V+1) x H
  Eigen::VectorXd task_b;         // V+1
  Eigen::RowVectorXd interval_w;  // 1 x H
  double interval_b = 0.0;

  int num_layers() const { return int(layers.size()); }
  std::ptrdiff_t parameter_count() const;
};

// Weights uniform in [-1/sqrt(H), +1/sqrt(H)] from a seeded generator;
// forget-gate bias 1.0, every other bias 0.
LstmParams init_params(int input_dim, int hidden_dim, int num_layers,
                       int vocab_size, uint64_t seed);

LstmParams zeros_like(const LstmParams& params);

// Flattened view used by the optimizers, gradient checking and the
// checkpoint writer. Order: per layer w_x, w_h, b (row-major), then
// task head, then interval head.
Eigen::VectorXd pack_params(const LstmParams& params);
void unpack_params(const Eigen::VectorXd& theta, LstmParams& params);

// Single cell step: i,f,o = logistic, g = tanh, c' = f.c + i.g,
// h' = o.tanh(c').
std::pair<Eigen::VectorXd, Eigen::VectorXd> cell_forward(
    const LayerParams& layer, const Eigen::VectorXd& x,
    const Eigen::VectorXd& h, const Eigen::VectorXd& c);

struct StepCache {
  Eigen::VectorXd x;  // layer input
  Eigen::VectorXd i, f, g, o;
  Eigen::VectorXd c, h;
};

struct ForwardCache {
  // steps[t][layer]
  std::vector<std::vector<StepCache>> steps;
  std::size_t length() const { return steps.size(); }
};

struct ForwardResult {
  Eigen::MatrixXd task_logits;  // T x (V+1)
  Eigen::VectorXd interval;     // T
  ForwardCache cache;
};

// Incremental runner holding (h, c) per layer; closed-loop generation and
// forward_sequence share this exact step path.
class LstmStepper {
 public:
  explicit LstmStepper(const LstmParams& params);

  struct Output {
    Eigen::VectorXd task_logits;
    double interval = 0.0;
  };

  // Advances one step; records per-layer activations into `cache_row` when
  // given. Throws NonFiniteActivation if the state leaves finite range.
  Output step(const Eigen::VectorXd& x,
              std::vector<StepCache>* cache_row = nullptr);

  const Eigen::VectorXd& hidden(int layer) const { return h_[size_t(layer)]; }
  const Eigen::VectorXd& cell(int layer) const { return c_[size_t(layer)]; }

 private:
  const LstmParams& params_;
  std::vector<Eigen::VectorXd> h_;
  std::vector<Eigen::VectorXd> c_;
};

// Runs the whole sequence from zero state; `inputs` is T x D. The cache is
// sufficient for exact backpropagation through time.
ForwardResult forward_sequence(const LstmParams& params,
                               const Eigen::MatrixXd& inputs);

struct StepTargets {
  std::vector<int> task;     // class index per step
  Eigen::VectorXd interval;  // standardized delta per step
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Mean over steps of (interval error)^2 + lambda_task * cross-entropy.
// lambda_task = 0 is pure interval regression.
double loss_joint(const Eigen::MatrixXd& task_logits,
                  const Eigen::VectorXd& interval_preds,
                  const StepTargets& targets, double lambda_task);

// Exact gradients of loss_joint w.r.t. every parameter, full BPTT over the
// cached sequence (no truncation).
LstmParams backward(const LstmParams& params, const ForwardCache& cache,
                    const StepTargets& targets, double lambda_task);

// Central-difference check over every parameter (seeded subsample above
// 10k parameters). Returns the max relative error with
// |analytic| + |numeric| + 1e-12 in the denominator.
double grad_check(const LstmParams& params, const Eigen::MatrixXd& inputs,
                  const StepTargets& targets, double lambda_task,
                  double epsilon, uint64_t subsample_seed = 0);

// Everything inference needs: weights plus the normalization that produced
// the training features.
struct TrainedModel {
  LstmParams params;
  NormStats stats;
  double lambda_task = 0.0;
};

// Text checkpoint, 17 significant digits per value (exact double
// round-trip). See write_checkpoint for the exact layout.
std::string write_checkpoint(const TrainedModel& model);
TrainedModel read_checkpoint(const std::string& text);

}  // namespace koracle
