#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "fedgrain/autodiff/graph.hpp"
#include "fedgrain/autodiff/param_set.hpp"

namespace fedgrain::models {

// Encoder-decoder with skip connections. Level l (0-based) uses base * 2^l
// channels; each level is two k x k convs with (leaky) ReLU, followed by 2x2 max
// pooling on the way down and nearest upsampling plus skip concat on the way
// up. The head is a 1 x 1 conv to out_channels.
struct UNetSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 2;
  std::size_t depth = 2;
  std::size_t base_channels = 4;
  std::size_t kernel = 3;
  double leaky_slope = 0.0;  // 0 = plain ReLU

  friend bool operator==(const UNetSpec&, const UNetSpec&) = default;
};

void validate(const UNetSpec& spec);

// Closed-form parameter count of build_unet(spec).
std::size_t unet_param_count(const UNetSpec& spec);

// Names follow "<block>.<conv>.w|b", e.g. "enc0.conv1.w", "mid.conv2.b", "dec0.conv1.w", "head.w".
ad::ParamSet build_unet(const UNetSpec& spec, std::uint64_t seed);

// x is [N, in_channels, H, W] with H, W divisible by 2^depth; returns raw
// head outputs [N, out_channels, H, W].
ad::NodeId unet_forward(ad::Graph& g, const ad::Binding& params, ad::NodeId x, const UNetSpec& spec);

}  // namespace fedgrain::models
