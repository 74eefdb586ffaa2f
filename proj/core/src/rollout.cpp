#include "koracle/rollout.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace koracle {
namespace {

std::string format_value(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

Eigen::VectorXd encode_input(const LstmParams& params, int task_index,
                             double delta_std) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(params.input_dim);
  if (params.input_dim == 1) {
    x(0) = delta_std;
  } else {
    if (task_index < 0 || task_index > params.vocab_size) {
      throw IndexOutOfRange("task index " + std::to_string(task_index) +
                            " outside vocabulary");
    }
    x(task_index) = 1.0;
    x(params.input_dim - 1) = delta_std;
  }
  return x;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoFailure("write failed for " + path.string());
}

}  // namespace

double stddev(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / double(values.size()));
}

RolloutResult rollout(const TrainedModel& model,
                      const std::vector<FeatureStep>& seed, int steps,
                      int epoch_tag) {
  if (seed.empty()) throw EmptySeed("rollout needs a non-empty seed");
  if (steps < 0) throw ConfigError("rollout steps must be >= 0");

  const LstmParams& params = model.params;
  RolloutResult result;
  result.epoch_tag = epoch_tag;
  result.seed_task.reserve(seed.size());
  result.seed_delta_std.reserve(seed.size());
  result.seed_delta_ns.reserve(seed.size());

  LstmStepper stepper(params);
  LstmStepper::Output out;
  for (const FeatureStep& step : seed) {
    result.seed_task.push_back(step.task_index);
    result.seed_delta_std.push_back(step.delta_std);
    result.seed_delta_ns.push_back(denormalize(step.delta_std, model.stats));
    out = stepper.step(encode_input(params, step.task_index, step.delta_std));
  }

  const bool keep_task = model.lambda_task > 0.0;
  for (int k = 0; k < steps; ++k) {
    double delta = out.interval;
    int task = argmax_lowest(out.task_logits);
    result.pred_delta_std.push_back(delta);
    result.pred_delta_ns.push_back(denormalize(delta, model.stats));
    if (keep_task) result.pred_task.push_back(task);
    out = stepper.step(encode_input(params, task, delta));
  }
  return result;
}

double next_task_accuracy(const TrainedModel& model, const SampleSet& test) {
  if (model.lambda_task <= 0.0) {
    throw TaskHeadDisabled("model was trained with lambda_task = 0");
  }
  if (test.windows.empty()) {
    throw EmptyTestSet("next_task_accuracy on empty test set");
  }
  const InputMode mode =
      model.params.input_dim == 1 ? InputMode::intervals : InputMode::joint;
  uint64_t hits = 0, total = 0;
  for (const SampleWindow& window : test.windows) {
    Eigen::MatrixXd inputs =
        assemble_inputs(window.inputs, mode, model.params.vocab_size);
    ForwardResult fwd = forward_sequence(model.params, inputs);
    for (std::size_t t = 0; t < window.targets.size(); ++t) {
      Eigen::VectorXd logits =
          fwd.task_logits.row(std::ptrdiff_t(t)).transpose();
      if (argmax_lowest(logits) == window.targets[t].task_index) ++hits;
      ++total;
    }
  }
  return double(hits) / double(total);
}

std::string write_rollout_csv(const RolloutResult& result) {
  const bool has_task = !result.pred_task.empty() || result.steps() == 0;
  // With zero predicted steps there is nothing to decide the column by;
  // keep the task column, seed rows always know their task.
  std::string out = has_task ? "pos,kind,delta_std,delta_ns,task\n"
                             : "pos,kind,delta_std,delta_ns\n";
  int64_t pos = 0;
  for (int i = 0; i < result.seed_len(); ++i, ++pos) {
    out += std::to_string(pos);
    out += ",seed,";
    out += format_value(result.seed_delta_std[std::size_t(i)]);
    out += ',';
    out += format_value(result.seed_delta_ns[std::size_t(i)]);
    if (has_task) {
      out += ',';
      out += std::to_string(result.seed_task[std::size_t(i)]);
    }
    out += '\n';
  }
  for (int i = 0; i < result.steps(); ++i, ++pos) {
    out += std::to_string(pos);
    out += ",pred,";
    out += format_value(result.pred_delta_std[std::size_t(i)]);
    out += ',';
    out += format_value(result.pred_delta_ns[std::size_t(i)]);
    if (has_task) {
      out += ',';
      out += std::to_string(result.pred_task[std::size_t(i)]);
    }
    out += '\n';
  }
  return out;
}

RolloutResult parse_rollout_csv(const std::string& text, int epoch_tag) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw MalformedLine(1, "empty rollout csv");
  bool has_task = false;
  if (line == "pos,kind,delta_std,delta_ns,task") {
    has_task = true;
  } else if (line != "pos,kind,delta_std,delta_ns") {
    throw MalformedLine(1, "bad rollout csv header '" + line + "'");
  }
  RolloutResult result;
  result.epoch_tag = epoch_tag;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != std::size_t(has_task ? 5 : 4)) {
      throw MalformedLine(line_no, "bad rollout row '" + line + "'");
    }
    const bool is_seed = fields[1] == "seed";
    if (!is_seed && fields[1] != "pred") {
      throw MalformedLine(line_no, "bad kind '" + fields[1] + "'");
    }
    double delta_std = std::strtod(fields[2].c_str(), nullptr);
    double delta_ns = std::strtod(fields[3].c_str(), nullptr);
    int task = has_task ? std::atoi(fields[4].c_str()) : -1;
    if (is_seed) {
      result.seed_delta_std.push_back(delta_std);
      result.seed_delta_ns.push_back(delta_ns);
      if (has_task) result.seed_task.push_back(task);
    } else {
      result.pred_delta_std.push_back(delta_std);
      result.pred_delta_ns.push_back(delta_ns);
      if (has_task) result.pred_task.push_back(task);
    }
  }
  return result;
}

std::string write_loss_curve(const TrainHistory& history) {
  std::string out = "epoch,train,test\n";
  for (const EpochRecord& rec : history.records) {
    out += std::to_string(rec.epoch);
    out += ',';
    out += format_value(rec.train_loss);
    out += ',';
    out += format_value(rec.test_loss);
    out += '\n';
  }
  return out;
}

TrainHistory parse_loss_curve(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train,test") {
    throw MalformedLine(1, "bad loss curve header");
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
          rec.test_loss)) {
      throw MalformedLine(line_no, "bad loss curve row '" + line + "'");
    }
    history.records.push_back(rec);
  }
  for (const EpochRecord& rec : history.records) {
    if (history.best_epoch == 0 || rec.test_loss < history.best_test_loss()) {
      history.best_epoch = rec.epoch;
    }
  }
  return history;
}

void emit_report(const TrainHistory& history,
                 const std::vector<RolloutResult>& rollouts,
                 const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir.string());

  write_file(out_dir / "loss_curve.csv", write_loss_curve(history));

  std::string report;
  report += "epochs: " + std::to_string(history.records.size()) + "\n";
  if (!history.records.empty()) {
    report += "best epoch: " + std::to_string(history.best_epoch) + "\n";
    report += "best test loss: " + format_value(history.best_test_loss()) +
              "\n";
    report += "final train loss: " +
              format_value(history.records.back().train_loss) + "\n";
    report += "final test loss: " +
              format_value(history.records.back().test_loss) + "\n";
  }
  for (const RolloutResult& r : rollouts) {
    write_file(out_dir /
                   ("rollout_epoch_" + std::to_string(r.epoch_tag) + ".csv"),
               write_rollout_csv(r));
    double seed_sd = stddev(r.seed_delta_std);
    double pred_sd = stddev(r.pred_delta_std);
    report += "rollout epoch " + std::to_string(r.epoch_tag) +
              ": seed_len=" + std::to_string(r.seed_len()) +
              " steps=" + std::to_string(r.steps()) +
              " seed_std=" + format_value(seed_sd) +
              " pred_std=" + format_value(pred_sd);
    if (seed_sd > 0.0) {
      report += " std_ratio=" + format_value(pred_sd / seed_sd);
    }
    report += "\n";
  }
  report +=
      "note: std_ratio is a heuristic spread proxy (predicted vs seed "
      "standard deviation), not a loss metric\n";
  write_file(out_dir / "report.txt", report);
}

}  // namespace koracle
