#pragma once

// Hand-built parameter sets shared by several test binaries.

#include <cmath>

#include "fedgrain/models/segmenter.hpp"
#include "fedgrain/models/style_model.hpp"

namespace fedgrain::fixture {

// Segmenter whose only live path is enc0 -> skip -> dec0 -> head, each conv
// passing channel 0 through its centre tap. The head scores grain with
// gain * (x - threshold) and boundary with the negation, so any image whose
// boundary pixels sit below the threshold and grain pixels above it is
// segmented perfectly.
inline ad::ParamSet perfect_segmenter(const models::SegmenterConfig& cfg, double gain = 50.0,
                                      double threshold = 0.5) {
  ad::ParamSet p = models::build_segmenter(cfg, 0);
  for (auto& e : p) e.value.fill(0.0);
  const std::size_t k = cfg.kernel, centre = (k / 2) * k + k / 2;
  auto pass = [&](const std::string& name, std::size_t in_channel) {
    ad::Tensor& w = p.at(name);
    w[(0 * w.dim(1) + in_channel) * k * k + centre] = 1.0;
  };
  pass("enc0.conv1.w", 0);
  pass("enc0.conv2.w", 0);
  pass("dec0.conv1.w", cfg.base_channels * 2);  // first skip channel, after the upsampled block
  pass("dec0.conv2.w", 0);
  ad::Tensor& hw = p.at("head.w");
  ad::Tensor& hb = p.at("head.b");
  const std::size_t c0 = hw.dim(1);
  hw[0 * c0 + 0] = -gain;
  hw[1 * c0 + 0] = gain;
  hb[0] = gain * threshold;
  hb[1] = -gain * threshold;
  return p;
}

// Style model with G(x) = constant `value` and D logits identically zero.
inline models::StyleModel constant_style_model(const models::StyleModelConfig& cfg, double value) {
  models::StyleModel m;
  m.owner = "fixture";
  m.config = cfg;
  m.generator = models::build_generator(cfg, 1);
  m.discriminator = models::build_discriminator(cfg, 2);
  m.generator.at("head.w").fill(0.0);
  m.generator.at("head.b").fill(std::log(value / (1.0 - value)));
  m.discriminator.at("d.conv3.w").fill(0.0);
  m.discriminator.at("d.conv3.b").fill(0.0);
  return m;
}

}  // namespace fedgrain::fixture
