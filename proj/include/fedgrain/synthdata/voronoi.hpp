#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedgrain/imaging/grid.hpp"

namespace fedgrain::synth {

struct Site {
  double y = 0.0;
  double x = 0.0;
};

struct VoronoiTiling {
  std::vector<Site> sites;
  // Index of the nearest site for every pixel (ties: lowest index).
  Grid<std::uint32_t> cell;
  LabelMap labels;
  InstanceMap instances;
};

// Nearest-site tessellation of pixel centres (y, x). A pixel is boundary iff
// one of its 4-neighbours lies in a different cell; grain instances are the
// 4-connected components of the remaining pixels.
VoronoiTiling voronoi_from_sites(std::size_t height, std::size_t width, std::span<const Site> sites);

// Sites drawn uniformly over the image from seed.
VoronoiTiling voronoi_labels(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t n_sites);

}  // namespace fedgrain::synth
