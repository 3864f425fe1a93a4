#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedgrain/autodiff/param_set.hpp"
#include "fedgrain/autodiff/tensor.hpp"

namespace fedgrain::ad {

using NodeId = std::size_t;

// Border handling for conv2d. Zero is the default everywhere in the models;
// reflect mirrors without repeating the edge pixel.
enum class Padding { kZero, kReflect };

class Graph;

// Parameter leaves of one ParamSet inside a Graph.
class Binding {
 public:
  NodeId node(std::string_view name) const;
  NodeId node(std::size_t index) const { return nodes_.at(index); }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class Graph;
  std::vector<NodeId> nodes_;
  std::vector<std::string> names_;
  std::vector<Shape> shapes_;
};

// Tape-based reverse-mode differentiation over a fixed layer zoo. Image
// tensors are NCHW. Every op validates shapes eagerly and names itself in
// the ShapeError it throws.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId constant(Tensor value);
  // Parameter leaves; with trainable = false they act as constants and no
  // gradient is propagated into them.
  Binding bind(const ParamSet& params, bool trainable = true);

  // Layers. x is [N, C, H, W]; weight is [O, C, K, K] with odd K; bias is [O].
  NodeId conv2d(NodeId x, NodeId weight, NodeId bias, Padding padding = Padding::kZero);
  NodeId relu(NodeId x);
  NodeId leaky_relu(NodeId x, double slope);
  NodeId sigmoid(NodeId x);
  NodeId softplus(NodeId x);
  NodeId upsample2x(NodeId x);
  NodeId max_pool2x2(NodeId x);
  NodeId mean_pool2x2(NodeId x);
  NodeId concat_channels(NodeId a, NodeId b);
  NodeId softmax_channels(NodeId x);

  // Scalar-producing reductions and arithmetic.
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId mean_abs_diff(NodeId a, NodeId b);
  // Mean over N*H*W of -log softmax(logits)[label]; labels are class indices in NHW order.
  NodeId softmax_cross_entropy(NodeId logits, std::span<const std::uint8_t> labels);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Throws DivergenceError on a non-finite loss.
  void backward(NodeId loss);
  // Gradient w.r.t. every leaf in binding; zero for leaves the loss does not reach.
  ParamSet gradients(const Binding& binding) const;
  ParamSet backward(NodeId loss, const Binding& binding) {
    backward(loss);
    return gradients(binding);
  }

  // Test hook: scales every gradient flowing out of the named op kind by
  // factor, to prove that gradient checks catch a broken backward rule.
  void corrupt_backward_for_testing(std::string kind, double factor) {
    corrupt_kind_ = std::move(kind);
    corrupt_factor_ = factor;
  }

 private:
  using Backprop = std::function<void(Graph&, NodeId)>;

  struct Node {
    std::string kind;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<NodeId> inputs;
    Backprop backprop;
  };

  NodeId push(std::string kind, Tensor value, std::vector<NodeId> inputs, Backprop backprop);
  Tensor& grad_of(NodeId id);
  bool needs(NodeId id) const { return nodes_[id].requires_grad; }
  const Node& at(NodeId id) const;

  NodeId unary(std::string kind, NodeId x, double (*fwd)(double, double),
               double (*dfdx)(double, double, double), double arg);

  std::vector<Node> nodes_;
  std::string corrupt_kind_;
  double corrupt_factor_ = 1.0;
};

}  // namespace fedgrain::ad
