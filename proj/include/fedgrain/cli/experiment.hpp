#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedgrain/federated/config.hpp"
#include "fedgrain/metrics/report.hpp"
#include "fedgrain/synthdata/dataset.hpp"
#include "json.hpp"

namespace fedgrain::cli {

struct EvaluationConfig {
  metrics::PartitionDomain domain = metrics::PartitionDomain::kIncludeBoundary;
};

// One JSON file drives synth -> train -> eval -> report.
//
//   { "dataset": {...}, "segmenter": {...}, "style_model": {...},
//     "federated": {...}, "evaluation": {...}, "output": "...", "repeat": n }
//
// Every section is optional; missing keys take the defaults below, which are
// the two-client desk benchmark.
struct ExperimentConfig {
  synth::DatasetConfig dataset;
  fed::FederatedConfig federated;  // carries the segmenter and style model sections
  EvaluationConfig evaluation;
  std::filesystem::path output = "runs";
  std::size_t repeat = 1;
};

ExperimentConfig default_experiment();

void validate(const ExperimentConfig& cfg);
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
// Starts from default_experiment(), rejects unknown keys, validates the result.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

std::string domain_name(metrics::PartitionDomain d);
metrics::PartitionDomain parse_domain(const std::string& s);

// The per-seed configurations of a repeated experiment. Seed k of n offsets
// both the dataset and the training seed by k; `seed` replaces both bases.
std::vector<ExperimentConfig> expand_seeds(const ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                                           std::optional<std::size_t> repeat);

}  // namespace fedgrain::cli
