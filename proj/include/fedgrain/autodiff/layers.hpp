#pragma once

#include <span>
#include <string_view>

#include "fedgrain/autodiff/graph.hpp"

namespace fedgrain::ad {

enum class LayerKind {
  kConv2d,
  kRelu,
  kLeakyRelu,
  kSigmoid,
  kUpsample2x,
  kMaxPool2x2,
  kMeanPool2x2,
  kConcatChannels,
  kSoftmaxChannels,
};

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  Padding padding = Padding::kZero;
  double slope = 0.2;  // leaky-relu only
};

std::string_view layer_name(LayerKind kind);

// Number of parameter tensors the layer consumes (conv2d: weight, bias).
std::size_t layer_param_count(LayerKind kind);
// Number of activation inputs (concat: 2).
std::size_t layer_input_count(LayerKind kind);

// Applies one layer inside an existing graph.
NodeId apply_layer(Graph& g, const LayerSpec& spec, std::span<const NodeId> params,
                   std::span<const NodeId> inputs);

// Stand-alone forward evaluation of one layer.
Tensor forward_layer(const LayerSpec& spec, std::span<const Tensor> params, std::span<const Tensor> inputs);

}  // namespace fedgrain::ad
