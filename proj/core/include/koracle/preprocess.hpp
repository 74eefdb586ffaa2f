#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koracle/trace.hpp"

namespace koracle {

// Task name <-> dense index. Index 0 is reserved for "<UNK>"; names get
// indices 1..V in order of first appearance. Unseen names look up as 0.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Returns the index of `name`, adding it if new.
  int add(const std::string& name);
  int index_of(const std::string& name) const;
  const std::string& name_of(int index) const;

  // Number of real names (excludes the <UNK> slot).
  int size() const { return int(names_.size()); }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> names_;  // names_[i] has index i + 1
  std::unordered_map<std::string, int> index_;
};

struct NormStats {
  double mean_ns = 0.0;
  double std_ns = 1.0;
  uint64_t outlier_threshold_ns = 1'000'000'000;
};

struct FeatureStep {
  int task_index = 0;
  double delta_std = 0.0;

  friend bool operator==(const FeatureStep&, const FeatureStep&) = default;
};

// Per-step (task index, standardized inter-schedule delta) pairs together
// with the statistics that produced them. Statistics are fitted on the
// chronological training prefix only.
struct FeatureSequence {
  std::vector<FeatureStep> steps;
  NormStats stats;
  Vocabulary vocab;

  std::size_t size() const { return steps.size(); }
};

enum class InputMode { intervals, joint };

struct PreprocessOptions {
  uint64_t outlier_threshold_ns = 1'000'000'000;
  double split_frac = 0.8;
  int window_len = 100;
  bool include_idle = true;
  InputMode inputs = InputMode::joint;
};

// A window of L consecutive steps turned into L-1 next-step pairs:
// inputs are the first L-1 steps, targets the same steps shifted by one.
struct SampleWindow {
  std::vector<FeatureStep> inputs;
  std::vector<FeatureStep> targets;
};

struct SampleSet {
  std::vector<SampleWindow> windows;
  int window_len = 0;
  bool is_test = false;
};

Vocabulary build_vocab(const Trace& trace);

Eigen::VectorXd one_hot(int index, int vocab_size);

// delta[i] = t[i+1] - t[i]; the final event contributes no delta.
std::vector<int64_t> diff_timestamps(const Trace& trace);

// Removes every delta >= threshold_ns and reports the removed positions.
std::pair<std::vector<int64_t>, std::vector<std::size_t>> filter_outliers(
    const std::vector<int64_t>& deltas, uint64_t threshold_ns);

// Population mean / standard deviation over the training split.
NormStats fit_standardize(const std::vector<int64_t>& train_deltas,
                          uint64_t threshold_ns);
double apply_standardize(int64_t delta_ns, const NormStats& stats);
double denormalize(double delta_std, const NormStats& stats);

// Full pipeline: vocabulary, differencing with drop-last, outlier removal
// in lockstep with the task steps, statistics on the chronological training
// prefix, standardization of every delta.
FeatureSequence build_features(const Trace& trace,
                               const PreprocessOptions& options);

// Chronological split at floor(split_frac * length) before windowing; each
// side is cut into non-overlapping windows of `window_len` steps.
std::pair<SampleSet, SampleSet> make_samples(const FeatureSequence& seq,
                                             int window_len,
                                             double split_frac);

// Model input assembly. intervals: x_t = [delta_std]; joint:
// x_t = [one_hot(task) ; delta_std]. Rows are steps.
int input_dim_for(InputMode mode, int vocab_size);
Eigen::MatrixXd assemble_inputs(const std::vector<FeatureStep>& steps,
                                InputMode mode, int vocab_size);

// Exports. Features: `# stats: mean=<f> std=<f> threshold=<u>` header then
// `task_index,delta_std` rows. Vocabulary: `index,name` rows.
std::string write_features(const FeatureSequence& seq);
std::string write_vocab(const Vocabulary& vocab);

}  // namespace koracle
