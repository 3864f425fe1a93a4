#include "fedgrain/autodiff/layers.hpp"

#include <string>
#include <vector>

namespace fedgrain::ad {

std::string_view layer_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kLeakyRelu: return "leaky_relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kUpsample2x: return "upsample2x";
    case LayerKind::kMaxPool2x2: return "max_pool2x2";
    case LayerKind::kMeanPool2x2: return "mean_pool2x2";
    case LayerKind::kConcatChannels: return "concat_channels";
    case LayerKind::kSoftmaxChannels: return "softmax_channels";
  }
  return "unknown";
}

std::size_t layer_param_count(LayerKind kind) { return kind == LayerKind::kConv2d ? 2 : 0; }

std::size_t layer_input_count(LayerKind kind) { return kind == LayerKind::kConcatChannels ? 2 : 1; }

NodeId apply_layer(Graph& g, const LayerSpec& spec, std::span<const NodeId> params,
                   std::span<const NodeId> inputs) {
  const std::string name(layer_name(spec.kind));
  if (params.size() != layer_param_count(spec.kind))
    throw ShapeError(name + ": expected " + std::to_string(layer_param_count(spec.kind)) +
                     " parameter tensors, got " + std::to_string(params.size()));
  if (inputs.size() != layer_input_count(spec.kind))
    throw ShapeError(name + ": expected " + std::to_string(layer_input_count(spec.kind)) +
                     " inputs, got " + std::to_string(inputs.size()));
  switch (spec.kind) {
    case LayerKind::kConv2d: return g.conv2d(inputs[0], params[0], params[1], spec.padding);
    case LayerKind::kRelu: return g.relu(inputs[0]);
    case LayerKind::kLeakyRelu: return g.leaky_relu(inputs[0], spec.slope);
    case LayerKind::kSigmoid: return g.sigmoid(inputs[0]);
    case LayerKind::kUpsample2x: return g.upsample2x(inputs[0]);
    case LayerKind::kMaxPool2x2: return g.max_pool2x2(inputs[0]);
    case LayerKind::kMeanPool2x2: return g.mean_pool2x2(inputs[0]);
    case LayerKind::kConcatChannels: return g.concat_channels(inputs[0], inputs[1]);
    case LayerKind::kSoftmaxChannels: return g.softmax_channels(inputs[0]);
  }
  throw ShapeError("apply_layer: unknown layer kind");
}

Tensor forward_layer(const LayerSpec& spec, std::span<const Tensor> params, std::span<const Tensor> inputs) {
  Graph g;
  std::vector<NodeId> p, x;
  for (const auto& t : params) p.push_back(g.constant(t));
  for (const auto& t : inputs) x.push_back(g.constant(t));
  return g.value(apply_layer(g, spec, p, x));
}

}  // namespace fedgrain::ad
