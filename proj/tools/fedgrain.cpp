#include <malloc.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedgrain/cli/commands.hpp"
#include "fedgrain/common/error.hpp"

namespace fs = std::filesystem;
using namespace fedgrain;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kIo = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> repeat;
  std::string out;
  std::size_t jobs = 1;
  std::vector<std::string> modes;
  std::vector<std::string> inputs;
  std::string data;
};

std::mutex log_mutex;

void log_line(const std::string& s) {
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << s << '\n';
}

cli::ExperimentConfig load(const Options& o) {
  return o.config.empty() ? cli::default_experiment() : cli::load_experiment(o.config);
}

fs::path root_of(const Options& o, const cli::ExperimentConfig& cfg) { return o.out.empty() ? cfg.output : fs::path(o.out); }

std::vector<fed::TrainingMode> modes_of(const Options& o) {
  if (o.modes.empty())
    return {fed::TrainingMode::kSeparate, fed::TrainingMode::kCentralized, fed::TrainingMode::kFedAvg,
            fed::TrainingMode::kFedTransfer};
  std::vector<fed::TrainingMode> out;
  for (const auto& m : o.modes) out.push_back(fed::parse_mode(m));
  return out;
}

void do_synth(const Options& o) {
  const auto cfg = load(o);
  const fs::path root = root_of(o, cfg);
  std::vector<std::function<void()>> tasks;
  for (const auto& c : cli::expand_seeds(cfg, o.seed, o.repeat)) tasks.push_back([c, root] { cli::cmd_synth(c, root, log_line); });
  cli::run_parallel(o.jobs, tasks);
}

std::vector<fs::path> do_train(const Options& o) {
  const auto cfg = load(o);
  const fs::path root = root_of(o, cfg);
  const auto modes = modes_of(o);
  std::vector<fs::path> runs(modes.size() * cli::expand_seeds(cfg, o.seed, o.repeat).size());
  std::vector<std::function<void()>> tasks;
  for (const auto& c : cli::expand_seeds(cfg, o.seed, o.repeat))
    for (auto m : modes) {
      const std::size_t slot = tasks.size();
      tasks.push_back([c, m, root, slot, &runs] { runs[slot] = cli::cmd_train(c, m, root, log_line); });
    }
  cli::run_parallel(o.jobs, tasks);
  return runs;
}

std::vector<fs::path> inputs_or_root(const Options& o) {
  std::vector<fs::path> in(o.inputs.begin(), o.inputs.end());
  if (in.empty()) in.push_back(root_of(o, load(o)) / "runs");
  return in;
}

void do_eval(const Options& o, const std::vector<fs::path>& inputs) {
  std::vector<fs::path> runs;
  for (const auto& in : inputs)
    for (auto& r : cli::find_runs(in)) runs.push_back(std::move(r));
  if (runs.empty()) throw IoError("no run directories found");
  const std::optional<fs::path> data = o.data.empty() ? std::nullopt : std::optional<fs::path>(o.data);
  std::vector<std::function<void()>> tasks;
  for (const auto& r : runs) tasks.push_back([r, data] { cli::cmd_eval(r, data, log_line); });
  cli::run_parallel(o.jobs, tasks);
}

void do_report(const Options& o, const std::vector<fs::path>& inputs) {
  const fs::path out = cli::report_dir(root_of(o, load(o)));
  const auto table = cli::cmd_report(inputs, out);
  std::cout << cli::report_text(table);
  log_line("report written to " + out.string());
}

void add_config_flags(CLI::App* app, Options& o, bool seeds) {
  app->add_option("--config", o.config, "Experiment configuration (JSON)")->check(CLI::ExistingFile);
  app->add_option("--out", o.out, "Experiment root directory (default: the config's \"output\")");
  app->add_option("--jobs", o.jobs, "Independent seeds or runs processed concurrently")->check(CLI::PositiveNumber);
  if (seeds) {
    app->add_option("--seed", o.seed, "Base seed for dataset and training (default: from the config)");
    app->add_option("--repeat", o.repeat, "Number of consecutive seeds (default: the config's \"repeat\")")
        ->check(CLI::PositiveNumber);
  }
}

}  // namespace

int main(int argc, char** argv) {
  // Training allocates and frees many large tensors per step; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Federated grain segmentation with image style transfer"};
  app.require_subcommand(1);
  Options o;

  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic client datasets");
  add_config_flags(synth_cmd, o, true);

  auto* train_cmd = app.add_subcommand("train", "Train one mode on the synthesized datasets");
  add_config_flags(train_cmd, o, true);
  train_cmd->add_option("--mode", o.modes, "separate, central, fedavg or fedtransfer (repeatable)")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate trained runs on every client's test split");
  add_config_flags(eval_cmd, o, false);
  eval_cmd->add_option("runs", o.inputs, "Run directories or directories containing runs (default: <out>/runs)");
  eval_cmd->add_option("--data", o.data, "Dataset directory, overriding the one recorded in the run manifest");

  auto* report_cmd = app.add_subcommand("report", "Tabulate evaluated runs, mean and std over seeds");
  add_config_flags(report_cmd, o, false);
  report_cmd->add_option("runs", o.inputs, "Run directories or directories containing runs (default: <out>/runs)");

  auto* run_cmd = app.add_subcommand("run", "synth, train, eval and report in one go");
  add_config_flags(run_cmd, o, true);
  run_cmd->add_option("--mode", o.modes, "Modes to train (default: all four)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*synth_cmd) {
      do_synth(o);
    } else if (*train_cmd) {
      do_train(o);
    } else if (*eval_cmd) {
      do_eval(o, inputs_or_root(o));
    } else if (*report_cmd) {
      do_report(o, inputs_or_root(o));
    } else if (*run_cmd) {
      do_synth(o);
      const auto runs = do_train(o);
      do_eval(o, runs);
      do_report(o, runs);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
