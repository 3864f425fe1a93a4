#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fedgrain/autodiff/graph.hpp"
#include "fedgrain/autodiff/param_set.hpp"
#include "fedgrain/imaging/grid.hpp"
#include "fedgrain/models/unet.hpp"

namespace fedgrain::models {

// Gray image in, two category logits out (channel 0 boundary, 1 grain).
struct SegmenterConfig {
  std::size_t depth = 2;
  std::size_t base_channels = 4;
  std::size_t kernel = 3;
  double leaky_slope = 0.1;

  UNetSpec unet() const { return {1, 2, depth, base_channels, kernel, leaky_slope}; }
  friend bool operator==(const SegmenterConfig&, const SegmenterConfig&) = default;
};

ad::ParamSet build_segmenter(const SegmenterConfig& cfg, std::uint64_t seed);
std::size_t segmenter_param_count(const SegmenterConfig& cfg);

// Stacks same-sized grids into NCHW tensors.
ad::Tensor image_batch(std::span<const GrayImage* const> images);
ad::Tensor one_hot_batch(std::span<const LabelMap* const> labels);
std::vector<std::uint8_t> label_vector(std::span<const LabelMap* const> labels);

ad::NodeId segmenter_logits(ad::Graph& g, const ad::Binding& params, ad::NodeId images, const SegmenterConfig& cfg);

// Mean per-pixel cross-entropy (natural log) over the batch.
ad::NodeId segmentation_loss_node(ad::Graph& g, const ad::Binding& params, const SegmenterConfig& cfg,
                                  const ad::Tensor& images, std::span<const std::uint8_t> labels);
double segmentation_loss(const ad::ParamSet& params, const SegmenterConfig& cfg,
                         std::span<const GrayImage* const> images, std::span<const LabelMap* const> labels);
// Loss value and its gradient; throws DivergenceError on a non-finite loss.
std::pair<double, ad::ParamSet> segmentation_loss_and_grad(const ad::ParamSet& params, const SegmenterConfig& cfg,
                                                           const ad::Tensor& images,
                                                           std::span<const std::uint8_t> labels);

// Per-pixel category probabilities, [1, 2, H, W].
ad::Tensor segmenter_probabilities(const ad::ParamSet& params, const SegmenterConfig& cfg, const GrayImage& image);

struct Prediction {
  LabelMap labels;
  InstanceMap instances;
};

// Argmax over a [1, 2, H, W] probability (or logit) tensor; ties go to boundary.
LabelMap argmax_labels(const ad::Tensor& scores);
// Argmax categories, then 4-connected components of the grain category.
Prediction prediction_from_scores(const ad::Tensor& scores);
Prediction predict_instances(const ad::ParamSet& params, const SegmenterConfig& cfg, const GrayImage& image);

}  // namespace fedgrain::models
