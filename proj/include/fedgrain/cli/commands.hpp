#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedgrain/cli/experiment.hpp"
#include "fedgrain/cli/report_table.hpp"
#include "fedgrain/federated/server.hpp"
#include "fedgrain/federated/training.hpp"
#include "fedgrain/models/style_model.hpp"

namespace fedgrain::cli {

using Logger = std::function<void(const std::string&)>;

// Output layout below the experiment root:
//   data/seed-<s>/                 synthesized datasets
//   runs/<mode>/seed-<s>/          one run directory per mode and seed
//   report/                        comparison tables
std::filesystem::path dataset_dir(const std::filesystem::path& root, std::uint64_t seed);
std::filesystem::path run_dir(const std::filesystem::path& root, fed::TrainingMode mode, std::uint64_t seed);
std::filesystem::path report_dir(const std::filesystem::path& root);

// Generates and writes the datasets of one seed; returns their directory.
std::filesystem::path cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& root,
                                const Logger& log = {});

// Trains one mode on the dataset of one seed and writes the run directory:
//   config.json          resolved configuration
//   rounds.jsonl         one RoundRecord per line
//   checkpoints/         best.fgps, plus round-NNNN.fgps when kept
//   transcript.jsonl     server messages (federated modes)
//   style_models/<id>/   trained style models (fedtransfer)
//   manifest.json        RunManifest with digests of all of the above
// Separate mode writes one such directory per client below client-<id>/.
std::filesystem::path cmd_train(const ExperimentConfig& cfg, fed::TrainingMode mode, const std::filesystem::path& root,
                                const Logger& log = {});

// Everything write_run needs to lay out a finished run.
struct RunRecord {
  ExperimentConfig config;
  std::string method;
  std::filesystem::path dataset;
  fed::TrainingResult training;
  const fed::Server* server = nullptr;
  const std::vector<models::StyleModel>* style_models = nullptr;
  std::vector<std::pair<std::string, double>> timings;
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
};

void write_run(const std::filesystem::path& dir, const RunRecord& record);

// Evaluates w* of a run (or of every subrun) on each client's test split and
// writes eval/{test-<id>.csv, test-<id>.json, global.json, summary.json,
// manifest.json}. The dataset location comes from the run manifest unless
// overridden; its digest must match either way. Returns the eval directories.
std::vector<std::filesystem::path> cmd_eval(const std::filesystem::path& run,
                                            const std::optional<std::filesystem::path>& dataset = std::nullopt,
                                            const Logger& log = {});

// Collects eval/summary.json below each input and writes report.csv,
// report.txt and report.dat into out.
ReportTable cmd_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out);

// Run directories at or below dir.
std::vector<std::filesystem::path> find_runs(const std::filesystem::path& dir);

// Runs tasks on up to `jobs` threads. The first exception, in task order, is
// rethrown after all tasks finish.
void run_parallel(std::size_t jobs, const std::vector<std::function<void()>>& tasks);

}  // namespace fedgrain::cli
