#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "koracle/pipeline.hpp"
#include "koracle/rollout.hpp"
#include "test_util.hpp"

using namespace koracle;

namespace {

// Small model trained once on the deterministic three-task trace; shared
// across the rollout cases below.
struct TrainedFixture {
  Trace trace;
  TrainArtifacts artifacts;
  PipelineConfig config;
};

const TrainedFixture& fixture() {
  static TrainedFixture fx = [] {
    TrainedFixture f;
    f.config.window_len = 30;
    f.config.hidden_dim = 16;
    f.config.num_layers = 1;
    f.config.train.epochs = 25;
    f.config.train.lambda_task = 1.0;
    f.trace = testutil::three_task_trace(1200, 0);
    f.artifacts = run_training(f.trace, f.config);
    return f;
  }();
  return fx;
}

std::vector<FeatureStep> seed_slice(const FeatureSequence& seq,
                                    std::size_t at, std::size_t len) {
  return {seq.steps.begin() + std::ptrdiff_t(at),
          seq.steps.begin() + std::ptrdiff_t(at + len)};
}

}  // namespace

TEST_CASE("rollout length contract") {
  const TrainedFixture& fx = fixture();
  const FeatureSequence& seq = fx.artifacts.data.features;
  std::vector<FeatureStep> seed = seed_slice(seq, 0, 50);

  RolloutResult none = rollout(fx.artifacts.best, seed, 0);
  CHECK(none.steps() == 0);
  CHECK(none.pred_delta_std.empty());
  CHECK(none.pred_task.empty());
  CHECK(none.seed_len() == 50);

  for (int steps : {1, 17, 230}) {
    RolloutResult r = rollout(fx.artifacts.best, seed, steps);
    CHECK(r.steps() == steps);
    CHECK(int(r.pred_delta_std.size()) == steps);
    CHECK(int(r.pred_delta_ns.size()) == steps);
    CHECK(int(r.pred_task.size()) == steps);  // lambda_task > 0
  }

  CHECK_THROWS_AS(rollout(fx.artifacts.best, {}, 5), EmptySeed);
}

TEST_CASE("first prediction equals the teacher-forced seed forward pass") {
  const TrainedFixture& fx = fixture();
  const FeatureSequence& seq = fx.artifacts.data.features;
  std::vector<FeatureStep> seed = seed_slice(seq, 10, 40);

  RolloutResult r = rollout(fx.artifacts.best, seed, 3);

  Eigen::MatrixXd inputs = assemble_inputs(seed, InputMode::joint,
                                           fx.artifacts.best.params.vocab_size);
  ForwardResult fwd = forward_sequence(fx.artifacts.best.params, inputs);
  const std::ptrdiff_t last = inputs.rows() - 1;
  CHECK(r.pred_delta_std[0] == fwd.interval(last));

  int argmax = 0;
  for (int k = 1; k < fwd.task_logits.cols(); ++k) {
    if (fwd.task_logits(last, k) > fwd.task_logits(last, argmax)) argmax = k;
  }
  CHECK(r.pred_task[0] == argmax);
}

TEST_CASE("denormalized deltas invert exactly") {
  const TrainedFixture& fx = fixture();
  const NormStats& stats = fx.artifacts.best.stats;
  std::vector<FeatureStep> seed =
      seed_slice(fx.artifacts.data.features, 0, 60);
  RolloutResult r = rollout(fx.artifacts.best, seed, 40);
  for (int i = 0; i < r.steps(); ++i) {
    double expected = r.pred_delta_std[std::size_t(i)] * stats.std_ns +
                      stats.mean_ns;
    CHECK(r.pred_delta_ns[std::size_t(i)] == expected);
    double back = (r.pred_delta_ns[std::size_t(i)] - stats.mean_ns) /
                  stats.std_ns;
    CHECK(std::abs(back - r.pred_delta_std[std::size_t(i)]) < 1e-9);
  }
}

TEST_CASE("rollouts from the same checkpoint are identical") {
  const TrainedFixture& fx = fixture();
  std::vector<FeatureStep> seed =
      seed_slice(fx.artifacts.data.features, 5, 50);
  RolloutResult a = rollout(fx.artifacts.best, seed, 64);
  RolloutResult b = rollout(fx.artifacts.best, seed, 64);
  CHECK(a.pred_delta_std == b.pred_delta_std);
  CHECK(a.pred_task == b.pred_task);
}

TEST_CASE("trained model continues the periodic schedule") {
  const TrainedFixture& fx = fixture();
  const FeatureSequence& seq = fx.artifacts.data.features;
  const std::size_t seed_len = 60, horizon = 100;
  const std::size_t at = seq.size() - seed_len - horizon;
  std::vector<FeatureStep> seed = seed_slice(seq, at, seed_len);

  RolloutResult r = rollout(fx.artifacts.best, seed, int(horizon));
  std::size_t hits = 0;
  for (std::size_t k = 0; k < horizon; ++k) {
    if (r.pred_task[k] == seq.steps[at + seed_len + k].task_index) ++hits;
  }
  CHECK(double(hits) / double(horizon) >= 0.9);

  // spread proxy on the noiseless dataset: predictions keep the seed's scale
  double seed_sd = stddev(r.seed_delta_std);
  double pred_sd = stddev(r.pred_delta_std);
  REQUIRE(seed_sd > 0.0);
  CHECK(pred_sd / seed_sd >= 0.5);
  CHECK(pred_sd / seed_sd <= 1.5);
}

TEST_CASE("next_task_accuracy") {
  const TrainedFixture& fx = fixture();
  double acc = next_task_accuracy(fx.artifacts.best, fx.artifacts.data.test_set);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(acc >= 0.9);  // deterministic successor pattern

  // hard-coded class 1 emitter on single-class data scores 1.0
  FeatureSequence mono;
  mono.stats = NormStats{0.0, 1.0, 1'000'000'000};
  mono.vocab.add("only");
  for (int i = 0; i < 40; ++i) {
    mono.steps.push_back(FeatureStep{1, (i % 2) ? 0.5 : -0.5});
  }
  auto [mono_train, mono_test] = make_samples(mono, 10, 0.5);
  TrainedModel hard;
  hard.params = zeros_like(init_params(3, 4, 1, 1, 0));
  hard.params.task_b(1) = 5.0;
  hard.stats = mono.stats;
  hard.lambda_task = 1.0;
  CHECK(next_task_accuracy(hard, mono_test) == 1.0);

  // uniform logits tie-break to <UNK>, which never appears as a target
  TrainedModel uniform = hard;
  uniform.params.task_b.setZero();
  CHECK(next_task_accuracy(uniform, mono_test) == 0.0);

  TrainedModel disabled = hard;
  disabled.lambda_task = 0.0;
  CHECK_THROWS_AS(next_task_accuracy(disabled, mono_test), TaskHeadDisabled);
  CHECK_THROWS_AS(next_task_accuracy(hard, SampleSet{}), EmptyTestSet);
}

TEST_CASE("rollout csv round-trip") {
  RolloutResult r;
  r.epoch_tag = 7;
  r.seed_task = {1, 2, 1};
  r.seed_delta_std = {0.25, -0.5, 1.0};
  r.seed_delta_ns = {1250.0, 500.0, 2000.0};
  r.pred_task = {2, 1};
  r.pred_delta_std = {0.125, 0.375};
  r.pred_delta_ns = {1125.0, 1375.0};

  std::string text = write_rollout_csv(r);
  RolloutResult back = parse_rollout_csv(text, 7);
  CHECK(back.seed_task == r.seed_task);
  CHECK(back.seed_delta_std == r.seed_delta_std);
  CHECK(back.seed_delta_ns == r.seed_delta_ns);
  CHECK(back.pred_task == r.pred_task);
  CHECK(back.pred_delta_std == r.pred_delta_std);
  CHECK(back.pred_delta_ns == r.pred_delta_ns);
  CHECK(write_rollout_csv(back) == text);

  // no task column when the model ran interval-only
  RolloutResult plain = r;
  plain.seed_task.clear();
  plain.pred_task.clear();
  std::string plain_text = write_rollout_csv(plain);
  CHECK(plain_text.rfind("pos,kind,delta_std,delta_ns\n", 0) == 0);
  RolloutResult plain_back = parse_rollout_csv(plain_text);
  CHECK(plain_back.pred_task.empty());
  CHECK(write_rollout_csv(plain_back) == plain_text);
}

TEST_CASE("emit_report file layout") {
  testutil::TempDir dir("report");
  TrainHistory history;
  history.records = {EpochRecord{1, 1.0, 1.5, 2.0, 1.0, false},
                     EpochRecord{2, 0.5, 0.625, 1.0, 1.0, false}};
  history.best_epoch = 2;

  SUBCASE("zero rollouts") {
    emit_report(history, {}, dir.path());
    CHECK(std::filesystem::exists(dir / "loss_curve.csv"));
    CHECK(std::filesystem::exists(dir / "report.txt"));
    CHECK(testutil::read_file(dir / "loss_curve.csv") ==
          "epoch,train,test\n1,1,1.5\n2,0.5,0.625\n");
    std::string report = testutil::read_file(dir / "report.txt");
    CHECK(report.find("best epoch: 2") != std::string::npos);
  }

  SUBCASE("seed rows come first and row counts add up") {
    RolloutResult r;
    r.epoch_tag = 2;
    for (int i = 0; i < 1200; ++i) {
      r.seed_task.push_back(1 + i % 2);
      r.seed_delta_std.push_back(double(i % 5) / 4.0);
      r.seed_delta_ns.push_back(double(i));
    }
    for (int i = 0; i < 1000; ++i) {
      r.pred_task.push_back(1 + i % 2);
      r.pred_delta_std.push_back(double(i % 3) / 2.0);
      r.pred_delta_ns.push_back(double(i));
    }
    emit_report(history, {r}, dir.path());
    std::string csv = testutil::read_file(dir / "rollout_epoch_2.csv");
    std::size_t rows = 0;
    std::size_t first_pred = std::string::npos;
    std::size_t last_seed = 0;
    std::size_t offset = csv.find('\n') + 1;  // skip header
    while (offset < csv.size()) {
      std::size_t end = csv.find('\n', offset);
      std::string line = csv.substr(offset, end - offset);
      if (line.find(",pred,") != std::string::npos) {
        first_pred = std::min(first_pred, rows);
      } else {
        last_seed = rows;
      }
      ++rows;
      offset = end + 1;
    }
    CHECK(rows == 2200);
    CHECK(first_pred == 1200);
    CHECK(last_seed == 1199);

    RolloutResult back = parse_rollout_csv(csv, 2);
    CHECK(back.seed_delta_std == r.seed_delta_std);
    CHECK(back.pred_delta_ns == r.pred_delta_ns);

    std::string report = testutil::read_file(dir / "report.txt");
    CHECK(report.find("rollout epoch 2") != std::string::npos);
    CHECK(report.find("std_ratio=") != std::string::npos);
  }
}
