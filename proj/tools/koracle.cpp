// koracle: synthesize or parse single-CPU scheduler traces, preprocess them
// into next-step prediction samples, train the LSTM predictor, and evaluate
// closed-loop rollouts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "koracle/cfs_sim.hpp"
#include "koracle/pipeline.hpp"
#include "koracle/pipeline_config.hpp"
#include "koracle/rollout.hpp"
#include "koracle/trace.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw koracle::ValidationError("cannot read file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw koracle::IoFailure("cannot write file: " + path.string());
  out << text;
  if (!out) throw koracle::IoFailure("write failed: " + path.string());
}

koracle::PipelineConfig load_config(const std::string& config_path,
                                    std::optional<uint64_t> seed) {
  koracle::PipelineConfig config;
  if (!config_path.empty()) {
    config = koracle::parse_pipeline_config(read_file(config_path));
  }
  if (seed) {
    config.seed = *seed;
    config.train.seed = *seed;
  }
  koracle::validate_pipeline_config(config);
  return config;
}

// rollout_epoch_<N>.csv / checkpoint_epoch_<N>.txt -> N
int tag_from_filename(const fs::path& path) {
  std::string stem = path.stem().string();
  std::size_t underscore = stem.rfind('_');
  if (underscore == std::string::npos) return 0;
  std::string digits = stem.substr(underscore + 1);
  if (digits.empty() ||
      digits.find_first_not_of("0123456789") != std::string::npos) {
    return 0;
  }
  return std::atoi(digits.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-CPU scheduler trace modeling toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<uint64_t> seed_flag;
  app.add_option("--config", config_path, "pipeline config file (key = value)")
      ->expected(1);
  app.add_option("--seed", seed_flag, "seed override");

  // simulate
  auto* simulate_cmd =
      app.add_subcommand("simulate", "generate a synthetic scheduler trace");
  std::string workload_path, sim_out;
  koracle::SimConfig sim_config;
  simulate_cmd->add_option("--workload", workload_path, "workload file")
      ->required();
  simulate_cmd->add_option("--out", sim_out, "output trace file")->required();
  simulate_cmd->add_option("--tick-ns", sim_config.tick_ns, "quantum length");
  simulate_cmd->add_option("--duration-ns", sim_config.duration_ns,
                           "simulated time");
  simulate_cmd->add_option("--jitter-ns", sim_config.jitter_ns,
                           "uniform timestamp jitter bound");
  simulate_cmd->callback([&] {
    sim_config.seed = load_config(config_path, seed_flag).seed;
    auto workload = koracle::parse_workload(read_file(workload_path));
    koracle::Trace trace = koracle::simulate(workload, sim_config);
    write_file(sim_out, koracle::write_trace(trace));
    std::cout << "wrote " << trace.size() << " events to " << sim_out << "\n";
  });

  // parse
  auto* parse_cmd =
      app.add_subcommand("parse", "convert sched map text to a trace file");
  std::string map_path, parse_out;
  std::optional<int> cpu_select;
  parse_cmd->add_option("--map", map_path, "sched map text file")->required();
  parse_cmd->add_option("--out", parse_out, "output trace file")->required();
  parse_cmd->add_option("--cpu", cpu_select,
                        "column to keep from multi-cpu input");
  parse_cmd->callback([&] {
    koracle::Trace trace =
        koracle::parse_perf_map(read_file(map_path), cpu_select);
    write_file(parse_out, koracle::write_trace(trace));
    std::cout << "wrote " << trace.size() << " events to " << parse_out
              << "\n";
  });

  // preprocess
  auto* preprocess_cmd = app.add_subcommand(
      "preprocess", "build feature sequence and vocabulary files");
  std::string pre_trace, pre_out;
  preprocess_cmd->add_option("--trace", pre_trace, "canonical trace file")
      ->required();
  preprocess_cmd->add_option("--out", pre_out, "output directory")->required();
  preprocess_cmd->callback([&] {
    auto config = load_config(config_path, seed_flag);
    koracle::Trace trace = koracle::parse_trace(read_file(pre_trace));
    koracle::FeatureSequence features =
        koracle::build_features(trace, config.preprocess_options());
    write_file(fs::path(pre_out) / "features.csv",
               koracle::write_features(features));
    write_file(fs::path(pre_out) / "vocab.csv",
               koracle::write_vocab(features.vocab));
    std::cout << "wrote " << features.size() << " steps, vocabulary of "
              << features.vocab.size() << " names to " << pre_out << "\n";
  });

  // train
  auto* train_cmd =
      app.add_subcommand("train", "train the predictor on a trace");
  std::string train_trace, train_out;
  std::optional<int> epochs_flag;
  std::optional<double> lambda_flag;
  train_cmd->add_option("--trace", train_trace, "canonical trace file")
      ->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--epochs", epochs_flag, "epoch count override");
  train_cmd->add_option("--lambda", lambda_flag,
                        "task-loss weight override (0 = intervals only)");
  train_cmd->callback([&] {
    auto config = load_config(config_path, seed_flag);
    if (epochs_flag) config.train.epochs = *epochs_flag;
    if (lambda_flag) config.train.lambda_task = *lambda_flag;
    koracle::validate_pipeline_config(config);
    koracle::Trace trace = koracle::parse_trace(read_file(train_trace));
    koracle::TrainArtifacts artifacts = koracle::run_training(trace, config);
    fs::path out(train_out);
    write_file(out / "history.csv", koracle::write_history(artifacts.history));
    write_file(out / "checkpoint_best.txt",
               koracle::write_checkpoint(artifacts.best));
    write_file(out / "checkpoint_final.txt",
               koracle::write_checkpoint(artifacts.final));
    for (const auto& [epoch, model] : artifacts.epoch_dumps) {
      write_file(out / ("checkpoint_epoch_" + std::to_string(epoch) + ".txt"),
                 koracle::write_checkpoint(model));
    }
    std::cout << "trained " << artifacts.history.records.size()
              << " epochs; best epoch " << artifacts.history.best_epoch
              << " with test loss " << artifacts.history.best_test_loss()
              << "\n";
  });

  // rollout
  auto* rollout_cmd = app.add_subcommand(
      "rollout", "closed-loop generation from a checkpoint");
  std::string ckpt_path, rollout_trace, rollout_out;
  std::optional<int> steps_flag, seed_len_flag, seed_at_flag, tag_flag;
  rollout_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")
      ->required();
  rollout_cmd->add_option("--trace", rollout_trace, "canonical trace file")
      ->required();
  rollout_cmd->add_option("--out", rollout_out, "output directory")
      ->required();
  rollout_cmd->add_option("--steps", steps_flag, "prediction steps");
  rollout_cmd->add_option("--seed-len", seed_len_flag, "seed window length");
  rollout_cmd->add_option("--seed-at", seed_at_flag,
                          "seed window start (default: sequence tail)");
  rollout_cmd->add_option("--tag", tag_flag,
                          "epoch tag (default: from checkpoint filename)");
  rollout_cmd->callback([&] {
    auto config = load_config(config_path, seed_flag);
    koracle::TrainedModel model =
        koracle::read_checkpoint(read_file(ckpt_path));
    koracle::Trace trace = koracle::parse_trace(read_file(rollout_trace));
    koracle::FeatureSequence features = koracle::features_with_stats(
        trace, model.stats, config.include_idle);

    const int steps = steps_flag.value_or(config.rollout_steps);
    const int seed_len = seed_len_flag.value_or(config.rollout_seed_len);
    if (seed_len < 1 || std::size_t(seed_len) > features.size()) {
      throw koracle::ValidationError(
          "seed length " + std::to_string(seed_len) +
          " not available in a sequence of " +
          std::to_string(features.size()) + " steps");
    }
    const int seed_at =
        seed_at_flag.value_or(int(features.size()) - seed_len);
    if (seed_at < 0 || std::size_t(seed_at + seed_len) > features.size()) {
      throw koracle::ValidationError("seed window out of range");
    }
    std::vector<koracle::FeatureStep> seed(
        features.steps.begin() + seed_at,
        features.steps.begin() + seed_at + seed_len);
    const int tag = tag_flag.value_or(tag_from_filename(ckpt_path));
    koracle::RolloutResult result = koracle::rollout(model, seed, steps, tag);

    fs::path out(rollout_out);
    write_file(out / ("rollout_epoch_" + std::to_string(tag) + ".csv"),
               koracle::write_rollout_csv(result));
    double seed_sd = koracle::stddev(result.seed_delta_std);
    double pred_sd = koracle::stddev(result.pred_delta_std);
    std::string report = "rollout epoch " + std::to_string(tag) +
                         ": seed_len=" + std::to_string(result.seed_len()) +
                         " steps=" + std::to_string(result.steps()) +
                         " seed_std=" + std::to_string(seed_sd) +
                         " pred_std=" + std::to_string(pred_sd) + "\n" +
                         "note: std comparison is a heuristic spread proxy\n";
    write_file(out / "report.txt", report);
    std::cout << "wrote " << result.steps() << " predictions after a "
              << result.seed_len() << "-step seed to " << rollout_out << "\n";
  });

  // report
  auto* report_cmd = app.add_subcommand(
      "report", "assemble loss curve and rollout summaries");
  std::string history_path, report_out;
  std::vector<std::string> rollout_files;
  report_cmd->add_option("--history", history_path, "history.csv from train")
      ->required();
  report_cmd->add_option("--rollout", rollout_files,
                         "rollout csv files (repeatable)");
  report_cmd->add_option("--out", report_out, "output directory")->required();
  report_cmd->callback([&] {
    koracle::TrainHistory history =
        koracle::parse_history(read_file(history_path));
    std::vector<koracle::RolloutResult> rollouts;
    for (const std::string& file : rollout_files) {
      rollouts.push_back(koracle::parse_rollout_csv(
          read_file(file), tag_from_filename(file)));
    }
    koracle::emit_report(history, rollouts, report_out);
    std::cout << "wrote report for " << history.records.size()
              << " epochs and " << rollouts.size() << " rollouts to "
              << report_out << "\n";
  });

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const koracle::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const koracle::RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
