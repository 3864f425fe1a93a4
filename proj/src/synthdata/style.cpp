#include "fedgrain/synthdata/style.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "fedgrain/common/rng.hpp"

namespace fedgrain::synth {

void validate(const StyleSpec& s) {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(s.boundary_mean) || !in01(s.grain_mean))
    throw std::invalid_argument("style: category means must lie in [0, 1]");
  if (!(s.grain_jitter >= 0.0 && s.grain_jitter <= 0.5)) throw std::invalid_argument("style: grain_jitter must be in [0, 0.5]");
  if (!(s.noise_sigma >= 0.0 && s.noise_sigma <= 0.5)) throw std::invalid_argument("style: noise_sigma must be in [0, 0.5]");
  if (s.blur_radius > 8) throw std::invalid_argument("style: blur_radius must be <= 8");
  if (!(s.texture_amplitude >= 0.0 && s.texture_amplitude <= 0.5))
    throw std::invalid_argument("style: texture_amplitude must be in [0, 0.5]");
  if (!(s.texture_frequency >= 0.0 && s.texture_frequency <= 0.5))
    throw std::invalid_argument("style: texture_frequency must be in [0, 0.5]");
}

namespace {

void box_blur(GrayImage& img, std::size_t r) {
  if (r == 0) return;
  const std::size_t h = img.height(), w = img.width();
  const double inv = 1.0 / static_cast<double>(2 * r + 1);
  GrayImage tmp(h, w);
  auto clampi = [](long v, std::size_t n) { return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1)); };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (long d = -static_cast<long>(r); d <= static_cast<long>(r); ++d) s += img.at(y, clampi(static_cast<long>(x) + d, w));
      tmp.at(y, x) = s * inv;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (long d = -static_cast<long>(r); d <= static_cast<long>(r); ++d) s += tmp.at(clampi(static_cast<long>(y) + d, h), x);
      img.at(y, x) = s * inv;
    }
}

}  // namespace

GrayImage render_style(const InstanceMap& instances, const StyleSpec& style, std::uint64_t seed) {
  validate(style);
  Rng rng(seed);
  std::uint32_t max_id = 0;
  for (auto id : instances.pixels()) max_id = std::max(max_id, id);

  struct GrainLook {
    double offset, angle, phase;
  };
  std::vector<GrainLook> look(max_id + 1, GrainLook{0, 0, 0});
  for (std::uint32_t k = 1; k <= max_id; ++k) {
    look[k].offset = style.grain_jitter > 0 ? uniform(rng, -style.grain_jitter, style.grain_jitter) : 0.0;
    look[k].angle = uniform(rng, 0.0, std::numbers::pi);
    look[k].phase = uniform(rng, 0.0, 2 * std::numbers::pi);
  }

  GrayImage img(instances.height(), instances.width());
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      const std::uint32_t id = instances.at(y, x);
      if (id == 0) {
        img.at(y, x) = style.boundary_mean;
        continue;
      }
      double v = style.grain_mean + look[id].offset;
      if (style.texture_amplitude > 0) {
        const double u = static_cast<double>(x) * std::cos(look[id].angle) + static_cast<double>(y) * std::sin(look[id].angle);
        v += style.texture_amplitude * std::sin(2 * std::numbers::pi * style.texture_frequency * u + look[id].phase);
      }
      img.at(y, x) = v;
    }
  box_blur(img, style.blur_radius);
  if (style.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, style.noise_sigma);
    for (auto& v : img.pixels()) v += noise(rng);
  }
  for (auto& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

GrayImage quantize8(const GrayImage& image) {
  GrayImage out = image;
  for (auto& v : out.pixels()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

}  // namespace fedgrain::synth
