#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedgrain/autodiff/graph.hpp"
#include "fedgrain/autodiff/param_set.hpp"
#include "fedgrain/imaging/grid.hpp"
#include "fedgrain/models/unet.hpp"
#include "fedgrain/synthdata/dataset.hpp"
#include "json.hpp"

namespace fedgrain::models {

struct StyleModelConfig {
  // Generator: label one-hot (2 channels) -> intensity logit, squashed by a sigmoid.
  std::size_t generator_depth = 2;
  std::size_t generator_base = 4;
  std::size_t kernel = 3;
  // Patch discriminator: three convs, two 2x2 mean pools; one logit per 4x4 patch.
  std::size_t discriminator_base = 8;
  // Activation slope in both networks.
  double leaky_slope = 0.2;

  std::size_t epochs = 8;
  std::size_t batch_size = 2;
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double lambda_l1 = 100.0;
  // Mean |y - G(x)| over the training split that a model must reach before it is shared.
  double l1_threshold = 0.1;
  // 0 trains on the whole training split; otherwise on its first max_images real samples.
  std::size_t max_images = 0;

  UNetSpec generator_unet() const { return {2, 1, generator_depth, generator_base, kernel, leaky_slope}; }
  friend bool operator==(const StyleModelConfig&, const StyleModelConfig&) = default;
};

void validate(const StyleModelConfig& cfg);
nlohmann::ordered_json to_json(const StyleModelConfig& cfg);
StyleModelConfig style_config_from_json(const nlohmann::json& j);

struct StyleTrainingHistory {
  std::vector<double> l1;                  // per-epoch mean of the generator's L1 term
  std::vector<double> discriminator_loss;  // per-epoch means
  std::vector<double> generator_loss;
};

struct StyleModel {
  std::string owner;
  StyleModelConfig config;
  std::uint64_t seed = 0;
  ad::ParamSet generator;
  ad::ParamSet discriminator;
  StyleTrainingHistory history;
  double final_l1 = 0.0;  // reconstruction L1 over the training images after the last epoch

  bool shareable() const { return final_l1 < config.l1_threshold; }
};

ad::ParamSet build_generator(const StyleModelConfig& cfg, std::uint64_t seed);
ad::ParamSet build_discriminator(const StyleModelConfig& cfg, std::uint64_t seed);

// one_hot is [N, 2, H, W]; returns G(x) in (0, 1), [N, 1, H, W].
ad::NodeId generator_forward(ad::Graph& g, const ad::Binding& gen, ad::NodeId one_hot, const StyleModelConfig& cfg);
// Patch logits [N, 1, H/4, W/4] for the (label, image) pair.
ad::NodeId discriminator_logits(ad::Graph& g, const ad::Binding& disc, ad::NodeId one_hot, ad::NodeId image,
                                const StyleModelConfig& cfg);

// -[log D(x,y) + log(1 - D(x,G(x)))] averaged over the patch grid, with D = sigmoid(logits).
ad::NodeId discriminator_loss_node(ad::Graph& g, ad::NodeId real_logits, ad::NodeId fake_logits);
// -log D(x,G(x)) averaged over patches, plus lambda * mean |y - G(x)|.
ad::NodeId generator_loss_node(ad::Graph& g, ad::NodeId fake_logits, ad::NodeId fake, ad::NodeId real,
                               double lambda_l1);

double discriminator_loss(const StyleModel& style, std::span<const LabelMap* const> labels,
                          std::span<const GrayImage* const> images);
double generator_loss(const StyleModel& style, std::span<const LabelMap* const> labels,
                      std::span<const GrayImage* const> images, double lambda_l1);

// Alternating D-step / G-step Adam updates on the client's real training samples.
// Throws DivergenceError naming the epoch on a non-finite loss.
StyleModel train_style_model(const synth::ClientDataset& client, const StyleModelConfig& cfg, std::uint64_t seed);

GrayImage generate_synthetic(const StyleModel& style, const LabelMap& labels);

// Wire form relayed by the server: two checkpoints plus a JSON sidecar.
struct StyleModelPayload {
  std::string generator_checkpoint;
  std::string discriminator_checkpoint;
  std::string sidecar;
};

StyleModelPayload serialize_style_model(const StyleModel& style);
StyleModel deserialize_style_model(const StyleModelPayload& payload);
void save_style_model(const std::filesystem::path& dir, const StyleModel& style);
StyleModel load_style_model(const std::filesystem::path& dir);

}  // namespace fedgrain::models
