#include <benchmark/benchmark.h>

#include <random>

#include "koracle/lstm.hpp"

namespace {

koracle::StepTargets make_targets(int steps, int vocab, uint64_t seed) {
  std::mt19937_64 rng(seed);
  koracle::StepTargets targets;
  targets.interval.resize(steps);
  for (int t = 0; t < steps; ++t) {
    targets.task.push_back(int(rng() % uint64_t(vocab + 1)));
    targets.interval(t) = double(rng() % 1000) / 500.0 - 1.0;
  }
  return targets;
}

Eigen::MatrixXd make_inputs(int steps, int dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd inputs(steps, dim);
  for (int t = 0; t < steps; ++t) {
    for (int d = 0; d < dim; ++d) {
      inputs(t, d) = double(rng() % 1000) / 500.0 - 1.0;
    }
  }
  return inputs;
}

void BM_ForwardSequence(benchmark::State& state) {
  const int hidden = int(state.range(0));
  koracle::LstmParams params = koracle::init_params(5, hidden, 2, 3, 7);
  Eigen::MatrixXd inputs = make_inputs(100, 5, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(koracle::forward_sequence(params, inputs));
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * 100);
}

void BM_ForwardBackward(benchmark::State& state) {
  const int hidden = int(state.range(0));
  koracle::LstmParams params = koracle::init_params(5, hidden, 2, 3, 7);
  Eigen::MatrixXd inputs = make_inputs(100, 5, 8);
  koracle::StepTargets targets = make_targets(100, 3, 9);
  for (auto _ : state) {
    koracle::ForwardResult fwd = koracle::forward_sequence(params, inputs);
    benchmark::DoNotOptimize(
        koracle::backward(params, fwd.cache, targets, 1.0));
  }
  state.SetItemsProcessed(int64_t(state.iterations()) * 100);
}

}  // namespace

BENCHMARK(BM_ForwardSequence)->Arg(16)->Arg(51)->Arg(128);
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(51)->Arg(128);
