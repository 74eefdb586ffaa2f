#pragma once

#include <map>

#include "koracle/pipeline_config.hpp"
#include "koracle/rollout.hpp"
#include "koracle/trace.hpp"

namespace koracle {

struct PreprocessArtifacts {
  FeatureSequence features;
  SampleSet train_set;
  SampleSet test_set;
};

PreprocessArtifacts run_preprocess(const Trace& trace,
                                   const PipelineConfig& config);

struct TrainArtifacts {
  PreprocessArtifacts data;
  TrainedModel best;   // parameters from the best test-loss epoch
  TrainedModel final;  // parameters after the last completed epoch
  TrainHistory history;
  std::map<int, TrainedModel> epoch_dumps;  // per config.dump_epochs
};

TrainArtifacts run_training(const Trace& trace, const PipelineConfig& config);

// Standardizes a trace with pre-fitted statistics (checkpoint inference
// path); the vocabulary is rebuilt from the trace in first-appearance
// order, which reproduces the training mapping for the training trace.
FeatureSequence features_with_stats(const Trace& trace, const NormStats& stats,
                                    bool include_idle);

}  // namespace koracle
