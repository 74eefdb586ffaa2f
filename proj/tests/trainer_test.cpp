#include <doctest.h>

#include <cmath>
#include <random>

#include "koracle/pipeline.hpp"
#include "koracle/trainer.hpp"
#include "test_util.hpp"

using namespace koracle;

namespace {

// 5-dim convex quadratic f(x) = 0.5 x'Ax - b'x with a fixed SPD A.
struct Quadratic {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;

  static Quadratic fixed() {
    Eigen::MatrixXd m(5, 5);
    m << 4, 1, 0, 0, 0,
         1, 3, 1, 0, 0,
         0, 1, 5, 1, 0,
         0, 0, 1, 2, 1,
         0, 0, 0, 1, 6;
    Eigen::VectorXd b(5);
    b << 1, -2, 3, -4, 5;
    return Quadratic{m, b};
  }

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    if (grad) *grad = a * x - b;
    return 0.5 * x.dot(a * x) - b.dot(x);
  }
};

PipelineConfig small_config() {
  PipelineConfig config;
  config.window_len = 24;
  config.hidden_dim = 12;
  config.num_layers = 1;
  config.train.epochs = 10;
  return config;
}

}  // namespace

TEST_CASE("lbfgs_direction with empty history is steepest descent") {
  Eigen::VectorXd grad(3);
  grad << 1.0, -2.0, 0.5;
  Eigen::VectorXd dir = lbfgs_direction(grad, {});
  CHECK(dir == -grad);
}

TEST_CASE("lbfgs reaches tiny gradients on the quadratic bowl") {
  Quadratic quad = Quadratic::fixed();
  Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    return quad(x, grad);
  };
  LbfgsOptimizer opt(Eigen::VectorXd::Zero(5), LbfgsOptions{});
  int used = 0;
  for (; used < 20; ++used) {
    opt.step(objective);
    if (opt.grad().norm() < 1e-8) break;
  }
  CHECK(opt.grad().norm() < 1e-8);
  CHECK(used < 20);
}

TEST_CASE("accepted line-search steps satisfy the sufficient decrease rule") {
  Quadratic quad = Quadratic::fixed();
  Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    return quad(x, grad);
  };
  LbfgsOptimizer opt(Eigen::VectorXd::Ones(5) * 3.0, LbfgsOptions{});
  opt.prime(objective);
  double prev = opt.value();
  for (int i = 0; i < 10; ++i) {
    LbfgsStep st = opt.step(objective);
    CHECK(!st.fallback);
    CHECK(st.loss <= prev);
    prev = st.loss;
  }
}

TEST_CASE("line-search failure falls back to a plain gradient step") {
  // c1 near 1 rejects the exact Newton-length step on a quadratic
  Objective objective = [](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) *grad = x;
    return 0.5 * x.squaredNorm();
  };
  LbfgsOptions options;
  options.c1 = 0.999;
  options.max_trials = 1;
  options.fallback_step = 0.25;
  LbfgsOptimizer opt(Eigen::VectorXd::Ones(4), options);
  LbfgsStep st = opt.step(objective);
  CHECK(st.fallback);
  CHECK(st.step_size == 0.25);
  CHECK(opt.x() == Eigen::VectorXd::Ones(4) * 0.75);
  CHECK(st.loss == doctest::Approx(0.5 * 4 * 0.75 * 0.75));
}

TEST_CASE("two-loop output is a descent direction") {
  std::mt19937_64 rng(505);
  auto random_vec = [&](int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = double(rng() % 2000) / 500.0 - 2.0;
    return v;
  };
  for (int iter = 0; iter < 100; ++iter) {
    const int n = 4 + int(rng() % 6);
    std::deque<CurvaturePair> pairs;
    const int m = int(rng() % 8);
    for (int k = 0; k < m; ++k) {
      Eigen::VectorXd s = random_vec(n);
      // y = (D + I) s with positive diagonal D keeps s.y > 0
      Eigen::VectorXd d = random_vec(n).cwiseAbs();
      Eigen::VectorXd y = (d.array() + 1.0).matrix().cwiseProduct(s);
      pairs.push_back(CurvaturePair{s, y});
    }
    Eigen::VectorXd grad = random_vec(n);
    if (grad.norm() == 0.0) continue;
    Eigen::VectorXd dir = lbfgs_direction(grad, pairs);
    CHECK(grad.dot(dir) < 0.0);
  }
}

TEST_CASE("history write/parse round-trip") {
  TrainHistory history;
  history.records = {EpochRecord{1, 0.5, 0.6, 1.25, 1.0, false},
                     EpochRecord{2, 0.25, 0.3, 0.75, 0.5, false}};
  history.best_epoch = 2;
  TrainHistory back = parse_history(write_history(history));
  REQUIRE(back.records.size() == 2);
  CHECK(back.best_epoch == 2);
  CHECK(back.records[0].train_loss == 0.5);
  CHECK(back.records[1].step_size == 0.5);
  CHECK_THROWS_AS(parse_history("nope\n"), MalformedLine);
}

TEST_CASE("evaluate") {
  // constant-interval targets and a bias-only model that matches them
  FeatureSequence seq;
  seq.stats = NormStats{0.0, 1.0, 1'000'000'000};
  for (int i = 0; i < 40; ++i) seq.steps.push_back(FeatureStep{1, 0.5});
  auto [train_set, test_set] = make_samples(seq, 10, 0.5);

  LstmParams params = zeros_like(init_params(3, 4, 1, 1, 0));
  params.interval_b = 0.5;
  double loss = evaluate(params, test_set, 0.0);
  CHECK(loss == 0.0);
  CHECK(evaluate(params, test_set, 0.0) == loss);

  // recomputation oracle: mean of per-window losses
  LstmParams rnd = init_params(3, 4, 1, 1, 321);
  WindowBatch batch = WindowBatch::from(test_set, InputMode::joint, 1);
  double total = 0.0;
  for (std::size_t w = 0; w < batch.size(); ++w) {
    ForwardResult fwd = forward_sequence(rnd, batch.inputs[w]);
    total += loss_joint(fwd.task_logits, fwd.interval, batch.targets[w], 0.0);
  }
  CHECK(evaluate(rnd, test_set, 0.0) ==
        doctest::Approx(total / double(batch.size())).epsilon(1e-15));

  CHECK_THROWS_AS(evaluate(params, SampleSet{}, 0.0), EmptyTestSet);
}

TEST_CASE("train runs one epoch and returns the stepped parameters") {
  Trace trace = testutil::three_task_trace(300, 0);
  PipelineConfig config = small_config();
  config.train.epochs = 1;
  PreprocessArtifacts data = run_preprocess(trace, config);
  LstmParams init =
      init_params(input_dim_for(config.inputs, data.features.vocab.size()),
                  config.hidden_dim, config.num_layers,
                  data.features.vocab.size(), config.seed);
  auto [model, history] = train(init, data.train_set, data.test_set,
                                data.features.stats, config.train);
  REQUIRE(history.records.size() == 1);
  CHECK(history.best_epoch == 1);
  CHECK(pack_params(model.params) != pack_params(init));
  CHECK(evaluate(model.params, data.test_set, config.train.lambda_task) ==
        history.records[0].test_loss);
}

TEST_CASE("training replays deterministically") {
  Trace trace = testutil::three_task_trace(300, 100'000, 7);
  PipelineConfig config = small_config();
  config.train.epochs = 5;
  auto run = [&] {
    TrainArtifacts artifacts = run_training(trace, config);
    return write_history(artifacts.history);
  };
  CHECK(run() == run());
}

TEST_CASE("loss halves on the alternating two-task dataset") {
  std::vector<TaskSpec> workload = {
      TaskSpec{"ping", 1536, TaskBehavior::cpu_bound, 0, 0, 0},
      TaskSpec{"pong", 1024, TaskBehavior::cpu_bound, 0, 0, 0}};
  SimConfig sim;
  sim.tick_ns = 1'000'000;
  sim.duration_ns = 500 * sim.tick_ns;
  Trace trace = simulate(workload, sim);

  PipelineConfig config = small_config();
  config.train.epochs = 30;
  config.train.lambda_task = 1.0;
  TrainArtifacts artifacts = run_training(trace, config);
  const auto& records = artifacts.history.records;
  REQUIRE(!records.empty());
  CHECK(records.back().train_loss < 0.5 * records.front().train_loss);

  // returned model carries the minimal recorded test loss
  double best = records.front().test_loss;
  for (const EpochRecord& rec : records) best = std::min(best, rec.test_loss);
  CHECK(artifacts.history.best_test_loss() == best);
  CHECK(evaluate(artifacts.best.params, artifacts.data.test_set,
                 config.train.lambda_task) == best);
}

TEST_CASE("descent optimizers run and record epochs") {
  Trace trace = testutil::three_task_trace(260, 0);
  PipelineConfig config = small_config();
  config.train.epochs = 3;
  config.train.learning_rate = 0.05;

  for (OptimizerKind kind :
       {OptimizerKind::sgd_momentum, OptimizerKind::adaptive}) {
    config.train.optimizer = kind;
    TrainArtifacts artifacts = run_training(trace, config);
    CHECK(artifacts.history.records.size() == 3);
    for (const EpochRecord& rec : artifacts.history.records) {
      CHECK(std::isfinite(rec.train_loss));
      CHECK(rec.step_size == 0.05);
    }
  }
}

TEST_CASE("diverging descent run raises DivergedLoss") {
  Trace trace = testutil::three_task_trace(260, 0);
  PipelineConfig config = small_config();
  config.train.epochs = 10;
  config.train.optimizer = OptimizerKind::sgd_momentum;
  config.train.learning_rate = 1e9;
  CHECK_THROWS_AS(run_training(trace, config), DivergedLoss);
}

TEST_CASE("early stopping honours patience") {
  Trace trace = testutil::three_task_trace(300, 100'000, 7);
  PipelineConfig config = small_config();
  config.train.epochs = 40;
  config.train.patience = 3;
  TrainArtifacts artifacts = run_training(trace, config);
  CHECK(artifacts.history.records.size() <= 40);
  const int best = artifacts.history.best_epoch;
  const int last = artifacts.history.records.back().epoch;
  CHECK(last - best <= 3);
}

TEST_CASE("train config validation") {
  TrainConfig config;
  config.epochs = 0;
  CHECK_THROWS_AS(validate_train_config(config), ConfigError);
  config = TrainConfig{};
  config.c1 = 1.5;
  CHECK_THROWS_AS(validate_train_config(config), ConfigError);
  config = TrainConfig{};
  config.lambda_task = -1.0;
  CHECK_THROWS_AS(validate_train_config(config), ConfigError);
}
