#include "koracle/pipeline.hpp"

namespace koracle {

PreprocessArtifacts run_preprocess(const Trace& trace,
                                   const PipelineConfig& config) {
  validate_pipeline_config(config);
  PreprocessArtifacts artifacts;
  artifacts.features = build_features(trace, config.preprocess_options());
  auto [train_set, test_set] =
      make_samples(artifacts.features, config.window_len, config.split_frac);
  artifacts.train_set = std::move(train_set);
  artifacts.test_set = std::move(test_set);
  return artifacts;
}

TrainArtifacts run_training(const Trace& trace, const PipelineConfig& config) {
  TrainArtifacts artifacts;
  artifacts.data = run_preprocess(trace, config);
  const FeatureSequence& features = artifacts.data.features;

  const int vocab_size = features.vocab.size();
  const int input_dim = input_dim_for(config.inputs, vocab_size);
  LstmParams init = init_params(input_dim, config.hidden_dim,
                                config.num_layers, vocab_size, config.seed);

  auto observer = [&](int epoch, const LstmParams& params) {
    TrainedModel snapshot{params, features.stats, config.train.lambda_task};
    for (int wanted : config.dump_epochs) {
      if (wanted == epoch) artifacts.epoch_dumps[epoch] = snapshot;
    }
    artifacts.final = std::move(snapshot);
  };

  auto [best, history] =
      train(init, artifacts.data.train_set, artifacts.data.test_set,
            features.stats, config.train, observer);
  artifacts.best = std::move(best);
  artifacts.history = std::move(history);
  return artifacts;
}

FeatureSequence features_with_stats(const Trace& trace, const NormStats& stats,
                                    bool include_idle) {
  Trace source;
  if (include_idle) {
    source = trace;
  } else {
    source.origin_note = trace.origin_note;
    for (const SchedEvent& ev : trace.events) {
      if (ev.task != "idle") source.events.push_back(ev);
    }
  }
  if (source.empty()) throw EmptyTrace("no events left to preprocess");

  FeatureSequence seq;
  seq.vocab = build_vocab(source);
  seq.stats = stats;

  std::vector<int64_t> deltas = diff_timestamps(source);
  auto [kept, removed] = filter_outliers(deltas, stats.outlier_threshold_ns);
  std::size_t next_removed = 0;
  std::size_t kept_at = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (next_removed < removed.size() && removed[next_removed] == i) {
      ++next_removed;
      continue;
    }
    seq.steps.push_back(
        FeatureStep{seq.vocab.index_of(source.events[i].task),
                    apply_standardize(kept[kept_at++], stats)});
  }
  return seq;
}

}  // namespace koracle
