#include "koracle/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace koracle {
namespace {

std::string format_value(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

InputMode mode_for(const LstmParams& params) {
  if (params.input_dim == 1) return InputMode::intervals;
  if (params.input_dim != params.vocab_size + 2) {
    throw DimensionMismatch("input_dim " + std::to_string(params.input_dim) +
                            " matches neither intervals (1) nor joint (" +
                            std::to_string(params.vocab_size + 2) + ")");
  }
  return InputMode::joint;
}

void add_scaled(LstmParams& acc, const LstmParams& g, double scale) {
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    acc.layers[l].w_x += scale * g.layers[l].w_x;
    acc.layers[l].w_h += scale * g.layers[l].w_h;
    acc.layers[l].b += scale * g.layers[l].b;
  }
  acc.task_w += scale * g.task_w;
  acc.task_b += scale * g.task_b;
  acc.interval_w += scale * g.interval_w;
  acc.interval_b += scale * g.interval_b;
}

}  // namespace

void validate_train_config(const TrainConfig& config) {
  if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (config.lbfgs_history < 1) throw ConfigError("lbfgs_history must be >= 1");
  if (config.c1 <= 0.0 || config.c1 >= 1.0) {
    throw ConfigError("c1 must be in (0, 1)");
  }
  if (config.backtrack <= 0.0 || config.backtrack >= 1.0) {
    throw ConfigError("backtrack must be in (0, 1)");
  }
  if (config.max_line_search < 1) {
    throw ConfigError("max_line_search must be >= 1");
  }
  if (config.learning_rate <= 0.0) {
    throw ConfigError("learning_rate must be positive");
  }
  if (config.lambda_task < 0.0) throw ConfigError("lambda_task must be >= 0");
  if (config.patience < 0) throw ConfigError("patience must be >= 0");
}

double TrainHistory::best_test_loss() const {
  for (const EpochRecord& rec : records) {
    if (rec.epoch == best_epoch) return rec.test_loss;
  }
  throw InsufficientData("history has no best epoch");
}

std::string write_history(const TrainHistory& history) {
  std::string out = "epoch,train_loss,test_loss,grad_norm,step_size\n";
  for (const EpochRecord& rec : history.records) {
    out += std::to_string(rec.epoch);
    out += ',';
    out += format_value(rec.train_loss);
    out += ',';
    out += format_value(rec.test_loss);
    out += ',';
    out += format_value(rec.grad_norm);
    out += ',';
    out += format_value(rec.step_size);
    out += '\n';
  }
  return out;
}

TrainHistory parse_history(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "epoch,train_loss,test_loss,grad_norm,step_size") {
    throw MalformedLine(1, "missing history header");
  }
  TrainHistory history;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    EpochRecord rec;
    char comma = 0;
    std::istringstream fields(line);
    if (!(fields >> rec.epoch >> comma >> rec.train_loss >> comma >>
          rec.test_loss >> comma >> rec.grad_norm >> comma >> rec.step_size)) {
      throw MalformedLine(line_no, "bad history row '" + line + "'");
    }
    history.records.push_back(rec);
  }
  for (const EpochRecord& rec : history.records) {
    if (history.best_epoch == 0 ||
        rec.test_loss < history.best_test_loss()) {
      history.best_epoch = rec.epoch;
    }
  }
  return history;
}

WindowBatch WindowBatch::from(const SampleSet& set, InputMode mode,
                              int vocab_size) {
  WindowBatch batch;
  batch.inputs.reserve(set.windows.size());
  batch.targets.reserve(set.windows.size());
  for (const SampleWindow& window : set.windows) {
    batch.inputs.push_back(assemble_inputs(window.inputs, mode, vocab_size));
    StepTargets targets;
    targets.task.reserve(window.targets.size());
    targets.interval.resize(std::ptrdiff_t(window.targets.size()));
    for (std::size_t t = 0; t < window.targets.size(); ++t) {
      targets.task.push_back(window.targets[t].task_index);
      targets.interval(std::ptrdiff_t(t)) = window.targets[t].delta_std;
    }
    batch.targets.push_back(std::move(targets));
  }
  return batch;
}

double evaluate(const LstmParams& params, const WindowBatch& test,
                double lambda_task) {
  if (test.size() == 0) throw EmptyTestSet("evaluate on empty window batch");
  double total = 0.0;
  for (std::size_t w = 0; w < test.size(); ++w) {
    ForwardResult fwd = forward_sequence(params, test.inputs[w]);
    total += loss_joint(fwd.task_logits, fwd.interval, test.targets[w],
                        lambda_task);
  }
  return total / double(test.size());
}

double evaluate(const LstmParams& params, const SampleSet& test,
                double lambda_task) {
  if (test.windows.empty()) throw EmptyTestSet("evaluate on empty test set");
  return evaluate(params,
                  WindowBatch::from(test, mode_for(params), params.vocab_size),
                  lambda_task);
}

std::pair<TrainedModel, TrainHistory> train(
    const LstmParams& init, const SampleSet& train_set,
    const SampleSet& test_set, const NormStats& stats,
    const TrainConfig& config, const EpochObserver& observer) {
  validate_train_config(config);
  if (train_set.windows.empty()) {
    throw InsufficientData("training set has no windows");
  }
  if (test_set.windows.empty()) {
    throw EmptyTestSet("test set has no windows");
  }

  const InputMode mode = mode_for(init);
  const WindowBatch train_batch =
      WindowBatch::from(train_set, mode, init.vocab_size);
  const WindowBatch test_batch =
      WindowBatch::from(test_set, mode, init.vocab_size);
  const double lambda = config.lambda_task;
  const double inv_windows = 1.0 / double(train_batch.size());

  LstmParams work = init;  // shape carrier for unpacking

  // Full-batch objective over the flattened parameter vector.
  auto objective = [&](const Eigen::VectorXd& theta,
                       Eigen::VectorXd* grad) -> double {
    unpack_params(theta, work);
    double total = 0.0;
    LstmParams grad_acc = grad ? zeros_like(work) : LstmParams{};
    for (std::size_t w = 0; w < train_batch.size(); ++w) {
      ForwardResult fwd = forward_sequence(work, train_batch.inputs[w]);
      total += loss_joint(fwd.task_logits, fwd.interval,
                          train_batch.targets[w], lambda);
      if (grad) {
        LstmParams g =
            backward(work, fwd.cache, train_batch.targets[w], lambda);
        add_scaled(grad_acc, g, inv_windows);
      }
    }
    if (grad) *grad = pack_params(grad_acc);
    return total * inv_windows;
  };

  // Per-window gradient for the descent optimizers.
  auto window_grad = [&](const Eigen::VectorXd& theta, std::size_t w,
                         Eigen::VectorXd* grad) -> double {
    unpack_params(theta, work);
    ForwardResult fwd = forward_sequence(work, train_batch.inputs[w]);
    double loss = loss_joint(fwd.task_logits, fwd.interval,
                             train_batch.targets[w], lambda);
    if (grad) {
      *grad =
          pack_params(backward(work, fwd.cache, train_batch.targets[w], lambda));
    }
    return loss;
  };

  TrainHistory history;
  Eigen::VectorXd theta = pack_params(init);
  Eigen::VectorXd best_theta = theta;
  double best_test = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  LbfgsOptions lbfgs_options;
  lbfgs_options.history = config.lbfgs_history;
  lbfgs_options.c1 = config.c1;
  lbfgs_options.backtrack = config.backtrack;
  lbfgs_options.max_trials = config.max_line_search;
  lbfgs_options.fallback_step = config.learning_rate;
  LbfgsOptimizer lbfgs(theta, lbfgs_options);

  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(theta.size());
  int64_t adam_steps = 0;
  constexpr double kMomentum = 0.9;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;

    try {
      if (config.optimizer == OptimizerKind::lbfgs) {
        LbfgsStep st = lbfgs.step(objective);
        rec.train_loss = st.loss;
        rec.grad_norm = st.grad_norm;
        rec.step_size = st.step_size;
        rec.line_search_fallback = st.fallback;
        theta = lbfgs.x();
      } else {
        Eigen::VectorXd grad;
        objective(theta, &grad);  // epoch-start gradient for the record
        rec.grad_norm = grad.norm();
        rec.step_size = config.learning_rate;
        for (std::size_t w = 0; w < train_batch.size(); ++w) {
          Eigen::VectorXd gw;
          window_grad(theta, w, &gw);
          if (config.optimizer == OptimizerKind::sgd_momentum) {
            velocity = kMomentum * velocity - config.learning_rate * gw;
            theta += velocity;
          } else {  // adaptive
            ++adam_steps;
            adam_m = kBeta1 * adam_m + (1.0 - kBeta1) * gw;
            adam_v = kBeta2 * adam_v.array() +
                     (1.0 - kBeta2) * gw.array().square();
            double bc1 = 1.0 - std::pow(kBeta1, double(adam_steps));
            double bc2 = 1.0 - std::pow(kBeta2, double(adam_steps));
            Eigen::ArrayXd m_hat = adam_m.array() / bc1;
            Eigen::ArrayXd v_hat = adam_v.array() / bc2;
            theta -=
                (config.learning_rate * m_hat / (v_hat.sqrt() + kAdamEps))
                    .matrix();
          }
        }
        rec.train_loss = objective(theta, nullptr);
      }
      unpack_params(theta, work);
      rec.test_loss = evaluate(work, test_batch, lambda);
    } catch (const NonFiniteActivation& e) {
      // a blown-up state during training is a divergence, not an input error
      throw DivergedLoss("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.test_loss)) {
      throw DivergedLoss("non-finite loss at epoch " + std::to_string(epoch));
    }
    history.records.push_back(rec);
    if (observer) observer(epoch, work);

    if (rec.test_loss < best_test) {
      best_test = rec.test_loss;
      best_theta = theta;
      history.best_epoch = epoch;
      epochs_since_best = 0;
    } else if (config.patience > 0 && ++epochs_since_best >= config.patience) {
      break;
    }
  }

  TrainedModel model;
  model.params = init;
  unpack_params(best_theta, model.params);
  model.stats = stats;
  model.lambda_task = lambda;
  return {std::move(model), std::move(history)};
}

}  // namespace koracle
