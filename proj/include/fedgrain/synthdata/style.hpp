#pragma once

#include <cstdint>

#include "fedgrain/imaging/grid.hpp"

namespace fedgrain::synth {

// Appearance of a micrograph, independent of its grain structure.
struct StyleSpec {
  double boundary_mean = 0.25;
  double grain_mean = 0.70;
  double grain_jitter = 0.0;       // per-grain offset, uniform in [-j, j]
  double noise_sigma = 0.0;        // additive Gaussian, after blur
  std::size_t blur_radius = 0;     // separable box blur, window 2r+1, edge-clamped
  double texture_amplitude = 0.0;  // per-grain oriented sinusoid
  double texture_frequency = 0.0;  // cycles per pixel

  friend bool operator==(const StyleSpec&, const StyleSpec&) = default;
};

// Throws std::invalid_argument for out-of-range parameters.
void validate(const StyleSpec& style);

GrayImage render_style(const InstanceMap& instances, const StyleSpec& style, std::uint64_t seed);

// Rounds every intensity to the nearest multiple of 1/255, matching what an
// 8-bit PGM stores.
GrayImage quantize8(const GrayImage& image);

}  // namespace fedgrain::synth
