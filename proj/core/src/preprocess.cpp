#include "koracle/preprocess.hpp"

#include <cmath>
#include <cstdio>

namespace koracle {

namespace {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

int Vocabulary::add(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  names_.push_back(name);
  int idx = int(names_.size());
  index_.emplace(name, idx);
  return idx;
}

int Vocabulary::index_of(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? 0 : it->second;
}

const std::string& Vocabulary::name_of(int index) const {
  static const std::string unk = "<UNK>";
  if (index == 0) return unk;
  if (index < 0 || index > size()) {
    throw IndexOutOfRange("vocabulary index " + std::to_string(index) +
                          " outside [0, " + std::to_string(size()) + "]");
  }
  return names_[std::size_t(index) - 1];
}

Vocabulary build_vocab(const Trace& trace) {
  Vocabulary vocab;
  for (const SchedEvent& ev : trace.events) vocab.add(ev.task);
  return vocab;
}

Eigen::VectorXd one_hot(int index, int vocab_size) {
  if (index < 0 || index > vocab_size) {
    throw IndexOutOfRange("one_hot index " + std::to_string(index) +
                          " outside [0, " + std::to_string(vocab_size) + "]");
  }
  Eigen::VectorXd vec = Eigen::VectorXd::Zero(vocab_size + 1);
  vec(index) = 1.0;
  return vec;
}

std::vector<int64_t> diff_timestamps(const Trace& trace) {
  if (trace.empty()) throw EmptyTrace("diff_timestamps on empty trace");
  std::vector<int64_t> deltas;
  deltas.reserve(trace.size() - 1);
  for (std::size_t i = 0; i + 1 < trace.events.size(); ++i) {
    deltas.push_back(trace.events[i + 1].timestamp_ns -
                     trace.events[i].timestamp_ns);
  }
  return deltas;
}

std::pair<std::vector<int64_t>, std::vector<std::size_t>> filter_outliers(
    const std::vector<int64_t>& deltas, uint64_t threshold_ns) {
  std::vector<int64_t> kept;
  std::vector<std::size_t> removed;
  kept.reserve(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (deltas[i] >= 0 && uint64_t(deltas[i]) >= threshold_ns) {
      removed.push_back(i);
    } else {
      kept.push_back(deltas[i]);
    }
  }
  return {std::move(kept), std::move(removed)};
}

NormStats fit_standardize(const std::vector<int64_t>& train_deltas,
                          uint64_t threshold_ns) {
  if (train_deltas.size() < 2) {
    throw InsufficientData("standardization needs at least 2 deltas, got " +
                           std::to_string(train_deltas.size()));
  }
  double mean = 0.0;
  for (int64_t d : train_deltas) mean += double(d);
  mean /= double(train_deltas.size());
  double var = 0.0;
  for (int64_t d : train_deltas) {
    double c = double(d) - mean;
    var += c * c;
  }
  var /= double(train_deltas.size());
  double std_ns = std::sqrt(var);
  if (std_ns < 1e-12) {
    throw ZeroVariance("constant-interval training split (std " +
                       format_double(std_ns) + " ns)");
  }
  return NormStats{mean, std_ns, threshold_ns};
}

double apply_standardize(int64_t delta_ns, const NormStats& stats) {
  return (double(delta_ns) - stats.mean_ns) / stats.std_ns;
}

double denormalize(double delta_std, const NormStats& stats) {
  return delta_std * stats.std_ns + stats.mean_ns;
}

FeatureSequence build_features(const Trace& trace,
                               const PreprocessOptions& options) {
  Trace source;
  if (options.include_idle) {
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

  std::vector<int64_t> deltas = diff_timestamps(source);
  auto [kept, removed] = filter_outliers(deltas, options.outlier_threshold_ns);

  // Task steps removed in lockstep with their deltas.
  std::vector<int> tasks;
  tasks.reserve(kept.size());
  std::size_t next_removed = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (next_removed < removed.size() && removed[next_removed] == i) {
      ++next_removed;
      continue;
    }
    tasks.push_back(seq.vocab.index_of(source.events[i].task));
  }

  if (options.split_frac <= 0.0 || options.split_frac >= 1.0) {
    throw ConfigError("split_frac must be in (0, 1)");
  }
  std::size_t split = std::size_t(options.split_frac * double(kept.size()));
  std::vector<int64_t> train_deltas(kept.begin(),
                                    kept.begin() + std::ptrdiff_t(split));
  seq.stats = fit_standardize(train_deltas, options.outlier_threshold_ns);

  seq.steps.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    seq.steps.push_back(
        FeatureStep{tasks[i], apply_standardize(kept[i], seq.stats)});
  }
  return seq;
}

std::pair<SampleSet, SampleSet> make_samples(const FeatureSequence& seq,
                                             int window_len,
                                             double split_frac) {
  if (window_len < 2) throw ConfigError("window_len must be at least 2");
  if (split_frac <= 0.0 || split_frac >= 1.0) {
    throw ConfigError("split_frac must be in (0, 1)");
  }
  const std::size_t n = seq.size();
  const std::size_t L = std::size_t(window_len);
  const std::size_t split = std::size_t(split_frac * double(n));

  auto cut = [&](std::size_t begin, std::size_t end, bool is_test) {
    SampleSet set;
    set.window_len = window_len;
    set.is_test = is_test;
    for (std::size_t w = begin; w + L <= end; w += L) {
      SampleWindow window;
      window.inputs.assign(seq.steps.begin() + std::ptrdiff_t(w),
                           seq.steps.begin() + std::ptrdiff_t(w + L - 1));
      window.targets.assign(seq.steps.begin() + std::ptrdiff_t(w + 1),
                            seq.steps.begin() + std::ptrdiff_t(w + L));
      set.windows.push_back(std::move(window));
    }
    return set;
  };

  SampleSet train = cut(0, split, false);
  SampleSet test = cut(split, n, true);
  if (train.windows.empty() || test.windows.empty()) {
    throw InsufficientData(
        "sequence of " + std::to_string(n) + " steps with window " +
        std::to_string(window_len) + " and split " + format_double(split_frac) +
        " yields " + std::to_string(train.windows.size()) + " train / " +
        std::to_string(test.windows.size()) + " test windows");
  }
  return {std::move(train), std::move(test)};
}

int input_dim_for(InputMode mode, int vocab_size) {
  return mode == InputMode::intervals ? 1 : vocab_size + 2;
}

Eigen::MatrixXd assemble_inputs(const std::vector<FeatureStep>& steps,
                                InputMode mode, int vocab_size) {
  const int dim = input_dim_for(mode, vocab_size);
  Eigen::MatrixXd inputs(std::ptrdiff_t(steps.size()), dim);
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const FeatureStep& step = steps[t];
    if (mode == InputMode::intervals) {
      inputs(std::ptrdiff_t(t), 0) = step.delta_std;
    } else {
      inputs.row(std::ptrdiff_t(t)).setZero();
      if (step.task_index < 0 || step.task_index > vocab_size) {
        throw IndexOutOfRange("task index " + std::to_string(step.task_index) +
                              " outside vocabulary");
      }
      inputs(std::ptrdiff_t(t), step.task_index) = 1.0;
      inputs(std::ptrdiff_t(t), dim - 1) = step.delta_std;
    }
  }
  return inputs;
}

std::string write_features(const FeatureSequence& seq) {
  std::string out = "# stats: mean=" + format_double(seq.stats.mean_ns) +
                    " std=" + format_double(seq.stats.std_ns) +
                    " threshold=" +
                    std::to_string(seq.stats.outlier_threshold_ns) + "\n";
  for (const FeatureStep& step : seq.steps) {
    out += std::to_string(step.task_index);
    out += ',';
    out += format_double(step.delta_std);
    out += '\n';
  }
  return out;
}

std::string write_vocab(const Vocabulary& vocab) {
  std::string out = "0,<UNK>\n";
  for (int i = 1; i <= vocab.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += vocab.name_of(i);
    out += '\n';
  }
  return out;
}

}  // namespace koracle
