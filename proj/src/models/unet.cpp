#include "fedgrain/models/unet.hpp"

#include <vector>

#include "fedgrain/autodiff/init.hpp"
#include "fedgrain/common/error.hpp"

namespace fedgrain::models {

namespace {

std::size_t channels(const UNetSpec& s, std::size_t level) { return s.base_channels << level; }

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + out; }

void add_conv(ad::ParamSet& p, const std::string& name, std::size_t in, std::size_t out, std::size_t k, Rng& rng) {
  p.add(name + ".w", ad::conv_weight(out, in, k, rng));
  p.add(name + ".b", ad::Tensor(ad::Shape{out}, 0.0));
}

ad::NodeId conv_act(ad::Graph& g, const ad::Binding& b, ad::NodeId x, const std::string& name, double slope) {
  const ad::NodeId y = g.conv2d(x, b.node(name + ".w"), b.node(name + ".b"));
  return slope == 0.0 ? g.relu(y) : g.leaky_relu(y, slope);
}

}  // namespace

void validate(const UNetSpec& s) {
  if (s.in_channels == 0 || s.out_channels == 0) throw ConfigError("unet: channel counts must be positive");
  if (s.depth == 0 || s.depth > 6) throw ConfigError("unet: depth must be in 1..6");
  if (s.base_channels == 0 || s.base_channels > 64) throw ConfigError("unet: base_channels must be in 1..64");
  if (s.kernel % 2 == 0 || s.kernel > 7) throw ConfigError("unet: kernel must be odd and <= 7");
  if (!(s.leaky_slope >= 0.0 && s.leaky_slope < 1.0)) throw ConfigError("unet: leaky_slope must be in [0, 1)");
}

std::size_t unet_param_count(const UNetSpec& s) {
  const std::size_t k = s.kernel;
  std::size_t total = 0;
  std::size_t in = s.in_channels;
  for (std::size_t l = 0; l < s.depth; ++l) {
    total += conv_params(in, channels(s, l), k) + conv_params(channels(s, l), channels(s, l), k);
    in = channels(s, l);
  }
  total += conv_params(in, channels(s, s.depth), k) + conv_params(channels(s, s.depth), channels(s, s.depth), k);
  for (std::size_t l = 0; l < s.depth; ++l)
    total += conv_params(channels(s, l + 1) + channels(s, l), channels(s, l), k) +
             conv_params(channels(s, l), channels(s, l), k);
  return total + conv_params(channels(s, 0), s.out_channels, 1);
}

ad::ParamSet build_unet(const UNetSpec& s, std::uint64_t seed) {
  validate(s);
  Rng rng(seed);
  ad::ParamSet p;
  std::size_t in = s.in_channels;
  for (std::size_t l = 0; l < s.depth; ++l) {
    const std::string blk = "enc" + std::to_string(l);
    add_conv(p, blk + ".conv1", in, channels(s, l), s.kernel, rng);
    add_conv(p, blk + ".conv2", channels(s, l), channels(s, l), s.kernel, rng);
    in = channels(s, l);
  }
  add_conv(p, "mid.conv1", in, channels(s, s.depth), s.kernel, rng);
  add_conv(p, "mid.conv2", channels(s, s.depth), channels(s, s.depth), s.kernel, rng);
  for (std::size_t l = s.depth; l-- > 0;) {
    const std::string blk = "dec" + std::to_string(l);
    add_conv(p, blk + ".conv1", channels(s, l + 1) + channels(s, l), channels(s, l), s.kernel, rng);
    add_conv(p, blk + ".conv2", channels(s, l), channels(s, l), s.kernel, rng);
  }
  add_conv(p, "head", channels(s, 0), s.out_channels, 1, rng);
  return p;
}

ad::NodeId unet_forward(ad::Graph& g, const ad::Binding& b, ad::NodeId x, const UNetSpec& s) {
  const auto& shape = g.value(x).shape();
  if (shape.size() != 4 || shape[1] != s.in_channels)
    throw ShapeError("unet: expected input [N," + std::to_string(s.in_channels) + ",H,W], got " + ad::shape_str(shape));
  const std::size_t div = std::size_t{1} << s.depth;
  if (shape[2] % div != 0 || shape[3] % div != 0)
    throw ShapeError("unet: spatial dims " + std::to_string(shape[2]) + "x" + std::to_string(shape[3]) +
                     " must be divisible by " + std::to_string(div) + " for depth " + std::to_string(s.depth));
  std::vector<ad::NodeId> skips;
  ad::NodeId h = x;
  for (std::size_t l = 0; l < s.depth; ++l) {
    const std::string blk = "enc" + std::to_string(l);
    h = conv_act(g, b, conv_act(g, b, h, blk + ".conv1", s.leaky_slope), blk + ".conv2", s.leaky_slope);
    skips.push_back(h);
    h = g.max_pool2x2(h);
  }
  h = conv_act(g, b, conv_act(g, b, h, "mid.conv1", s.leaky_slope), "mid.conv2", s.leaky_slope);
  for (std::size_t l = s.depth; l-- > 0;) {
    const std::string blk = "dec" + std::to_string(l);
    h = g.concat_channels(g.upsample2x(h), skips[l]);
    h = conv_act(g, b, conv_act(g, b, h, blk + ".conv1", s.leaky_slope), blk + ".conv2", s.leaky_slope);
  }
  return g.conv2d(h, b.node("head.w"), b.node("head.b"));
}

}  // namespace fedgrain::models
