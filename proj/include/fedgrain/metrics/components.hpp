#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "fedgrain/imaging/grid.hpp"

namespace fedgrain::metrics {

// 4-connected components of the grain category. Ids are dense, assigned in
// raster-scan order of each component's first pixel; boundary pixels get 0.
InstanceMap connected_components(const LabelMap& labels);

// Number of distinct nonzero ids.
std::size_t count_instances(const InstanceMap& instances);

// |a & b| / |a | b| over nonzero mask entries; 0 when both sets are empty.
double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

}  // namespace fedgrain::metrics
