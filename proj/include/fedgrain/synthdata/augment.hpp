#pragma once

#include <cstddef>
#include <cstdint>

#include "fedgrain/imaging/grid.hpp"

namespace fedgrain::synth {

enum class EraseFill { kConstant, kNoise };

struct ErasingConfig {
  double probability = 0.5;
  double min_area = 0.02;  // fraction of H*W
  double max_area = 0.2;
  double min_aspect = 0.3;  // aspect ratio drawn log-uniformly from [min_aspect, 1/min_aspect]
  EraseFill fill = EraseFill::kNoise;
  double constant = 0.5;
};

struct ErasedRegion {
  bool applied = false;
  std::size_t y0 = 0, x0 = 0, height = 0, width = 0;
};

void validate(const ErasingConfig& config);

// With the configured probability overwrites one axis-aligned rectangle whose
// area fraction lies in [min_area, max_area]. Labels are never touched.
GrayImage random_erasing(const GrayImage& image, std::uint64_t seed, const ErasingConfig& config,
                         ErasedRegion* region = nullptr);

}  // namespace fedgrain::synth
