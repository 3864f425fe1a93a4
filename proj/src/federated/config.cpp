#include "fedgrain/federated/config.hpp"

#include "fedgrain/common/error.hpp"

namespace fedgrain::fed {

namespace {

void reject_unknown(const nlohmann::json& j, const nlohmann::ordered_json& defaults, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!defaults.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

std::string mode_name(TrainingMode m) {
  switch (m) {
    case TrainingMode::kSeparate: return "separate";
    case TrainingMode::kCentralized: return "central";
    case TrainingMode::kFedAvg: return "fedavg";
    case TrainingMode::kFedTransfer: return "fedtransfer";
  }
  return "?";
}

TrainingMode parse_mode(const std::string& s) {
  if (s == "separate") return TrainingMode::kSeparate;
  if (s == "central" || s == "centralized") return TrainingMode::kCentralized;
  if (s == "fedavg") return TrainingMode::kFedAvg;
  if (s == "fedtransfer") return TrainingMode::kFedTransfer;
  throw ConfigError("unknown training mode '" + s + "' (expected separate, central, fedavg or fedtransfer)");
}

void validate(const FederatedConfig& c) {
  if (c.rounds < 1 || c.separate_rounds < 1) throw ConfigError("federated: round budgets must be >= 1");
  if (c.local_epochs < 1) throw ConfigError("federated: local_epochs (E) must be >= 1");
  if (c.batch_size < 1) throw ConfigError("federated: batch_size (B) must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("federated: learning_rate must be > 0");
  if (c.jobs < 1) throw ConfigError("federated: jobs must be >= 1");
  validate(c.segmenter.unet());
  validate(c.style);
  try {
    synth::validate(c.erasing);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("federated.erasing: ") + e.what());
  }
}

ad::OptimizerState make_optimizer(const FederatedConfig& c) {
  return c.optimizer == ad::OptimizerKind::kAdam ? ad::OptimizerState::adam(c.learning_rate)
                                                 : ad::OptimizerState::sgd(c.learning_rate);
}

nlohmann::ordered_json to_json(const models::SegmenterConfig& c) {
  return {{"depth", c.depth}, {"base_channels", c.base_channels}, {"kernel", c.kernel}, {"leaky_slope", c.leaky_slope}};
}

models::SegmenterConfig segmenter_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, to_json(models::SegmenterConfig{}), "segmenter");
  models::SegmenterConfig c;
  read_key(j, "depth", c.depth, "segmenter");
  read_key(j, "base_channels", c.base_channels, "segmenter");
  read_key(j, "kernel", c.kernel, "segmenter");
  read_key(j, "leaky_slope", c.leaky_slope, "segmenter");
  validate(c.unet());
  return c;
}

nlohmann::ordered_json to_json(const synth::ErasingConfig& c) {
  return {{"probability", c.probability},
          {"min_area", c.min_area},
          {"max_area", c.max_area},
          {"min_aspect", c.min_aspect},
          {"fill", c.fill == synth::EraseFill::kConstant ? "constant" : "noise"},
          {"constant", c.constant}};
}

synth::ErasingConfig erasing_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, to_json(synth::ErasingConfig{}), "erasing");
  synth::ErasingConfig c;
  read_key(j, "probability", c.probability, "erasing");
  read_key(j, "min_area", c.min_area, "erasing");
  read_key(j, "max_area", c.max_area, "erasing");
  read_key(j, "min_aspect", c.min_aspect, "erasing");
  read_key(j, "constant", c.constant, "erasing");
  std::string fill = "noise";
  read_key(j, "fill", fill, "erasing");
  if (fill == "constant")
    c.fill = synth::EraseFill::kConstant;
  else if (fill == "noise")
    c.fill = synth::EraseFill::kNoise;
  else
    throw ConfigError("erasing.fill: expected 'constant' or 'noise', got '" + fill + "'");
  try {
    synth::validate(c);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("erasing: ") + e.what());
  }
  return c;
}

nlohmann::ordered_json to_json(const FederatedConfig& c) {
  return {{"mode", mode_name(c.mode)},
          {"rounds", c.rounds},
          {"separate_rounds", c.separate_rounds},
          {"local_epochs", c.local_epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer == ad::OptimizerKind::kAdam ? "adam" : "sgd"},
          {"style_transfer", c.style_transfer},
          {"augment", c.augment},
          {"erasing", to_json(c.erasing)},
          {"seed", c.seed},
          {"jobs", c.jobs},
          {"keep_round_checkpoints", c.keep_round_checkpoints},
          {"segmenter", to_json(c.segmenter)},
          {"style_model", models::to_json(c.style)}};
}

FederatedConfig federated_config_from_json(const nlohmann::json& j) {
  const std::string where = "federated";
  reject_unknown(j, to_json(FederatedConfig{}), where);
  FederatedConfig c;
  if (j.contains("mode")) {
    std::string m;
    read_key(j, "mode", m, where);
    c.mode = parse_mode(m);
  }
  read_key(j, "rounds", c.rounds, where);
  read_key(j, "separate_rounds", c.separate_rounds, where);
  read_key(j, "local_epochs", c.local_epochs, where);
  read_key(j, "batch_size", c.batch_size, where);
  read_key(j, "learning_rate", c.learning_rate, where);
  if (j.contains("optimizer")) {
    std::string o;
    read_key(j, "optimizer", o, where);
    if (o == "adam")
      c.optimizer = ad::OptimizerKind::kAdam;
    else if (o == "sgd")
      c.optimizer = ad::OptimizerKind::kSgd;
    else
      throw ConfigError("federated.optimizer: expected 'adam' or 'sgd', got '" + o + "'");
  }
  read_key(j, "style_transfer", c.style_transfer, where);
  read_key(j, "augment", c.augment, where);
  if (j.contains("erasing")) c.erasing = erasing_config_from_json(j["erasing"]);
  read_key(j, "seed", c.seed, where);
  read_key(j, "jobs", c.jobs, where);
  read_key(j, "keep_round_checkpoints", c.keep_round_checkpoints, where);
  if (j.contains("segmenter")) c.segmenter = segmenter_config_from_json(j["segmenter"]);
  if (j.contains("style_model")) c.style = models::style_config_from_json(j["style_model"]);
  validate(c);
  return c;
}

}  // namespace fedgrain::fed
