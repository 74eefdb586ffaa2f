#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "koracle/lstm.hpp"
#include "koracle/trainer.hpp"

namespace koracle {

// Closed-loop generation after a teacher-forced seed. Predicted task
// indices are kept only for models trained with lambda_task > 0.
struct RolloutResult {
  std::vector<int> seed_task;
  std::vector<double> seed_delta_std;
  std::vector<double> seed_delta_ns;
  std::vector<int> pred_task;
  std::vector<double> pred_delta_std;
  std::vector<double> pred_delta_ns;
  int epoch_tag = 0;

  int seed_len() const { return int(seed_delta_std.size()); }
  int steps() const { return int(pred_delta_std.size()); }
};

// Consumes the seed teacher-forced, then feeds each prediction back as the
// next input for exactly `steps` iterations. Task feedback is the argmax
// logit re-encoded one-hot (ties break to the lowest index); interval
// feedback is the raw predicted standardized value.
RolloutResult rollout(const TrainedModel& model,
                      const std::vector<FeatureStep>& seed, int steps,
                      int epoch_tag = 0);

// One-step teacher-forced argmax accuracy over every step of the test set.
double next_task_accuracy(const TrainedModel& model, const SampleSet& test);

// Rollout CSV: header `pos,kind,delta_std,delta_ns[,task]`, seed rows
// first. The task column is present exactly when predictions carry task
// indices.
std::string write_rollout_csv(const RolloutResult& result);
RolloutResult parse_rollout_csv(const std::string& text, int epoch_tag = 0);

// Writes loss_curve.csv, one rollout_epoch_<N>.csv per rollout, and a
// report.txt summary into out_dir.
void emit_report(const TrainHistory& history,
                 const std::vector<RolloutResult>& rollouts,
                 const std::filesystem::path& out_dir);

// `epoch,train,test` table, parsed back for report assembly.
std::string write_loss_curve(const TrainHistory& history);
TrainHistory parse_loss_curve(const std::string& text);

double stddev(const std::vector<double>& values);

}  // namespace koracle
