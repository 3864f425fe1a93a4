#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "fedgrain/autodiff/optim.hpp"
#include "fedgrain/models/segmenter.hpp"
#include "fedgrain/models/style_model.hpp"
#include "fedgrain/synthdata/augment.hpp"
#include "json.hpp"

namespace fedgrain::fed {

enum class TrainingMode { kSeparate, kCentralized, kFedAvg, kFedTransfer };

std::string mode_name(TrainingMode mode);
// Accepts "separate", "central" / "centralized", "fedavg", "fedtransfer".
TrainingMode parse_mode(const std::string& name);

struct FederatedConfig {
  TrainingMode mode = TrainingMode::kFedTransfer;
  std::size_t rounds = 10;           // K, federated and centralized
  std::size_t separate_rounds = 20;  // per-client budget in separate mode
  std::size_t local_epochs = 1;      // E
  std::size_t batch_size = 8;        // B
  double learning_rate = 5e-3;       // eta
  ad::OptimizerKind optimizer = ad::OptimizerKind::kAdam;
  // Ablation switch: with false, fedtransfer reduces to plain FedAvg.
  bool style_transfer = true;
  bool augment = true;
  synth::ErasingConfig erasing;
  std::uint64_t seed = 1;
  // Clients trained concurrently within a round; results do not depend on it.
  std::size_t jobs = 1;
  bool keep_round_checkpoints = false;

  models::SegmenterConfig segmenter;
  models::StyleModelConfig style;
};

void validate(const FederatedConfig& cfg);
ad::OptimizerState make_optimizer(const FederatedConfig& cfg);

nlohmann::ordered_json to_json(const FederatedConfig& cfg);
// Rejects unknown keys with ConfigError. Sub-objects "segmenter", "style_model" and "erasing" are optional.
FederatedConfig federated_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const models::SegmenterConfig& cfg);
models::SegmenterConfig segmenter_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const synth::ErasingConfig& cfg);
synth::ErasingConfig erasing_config_from_json(const nlohmann::json& j);

}  // namespace fedgrain::fed
