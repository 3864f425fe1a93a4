#include "fedgrain/synthdata/voronoi.hpp"

#include <limits>
#include <stdexcept>
#include <string>

#include "fedgrain/common/rng.hpp"
#include "fedgrain/metrics/components.hpp"

namespace fedgrain::synth {

VoronoiTiling voronoi_from_sites(std::size_t height, std::size_t width, std::span<const Site> sites) {
  if (sites.empty()) throw std::invalid_argument("voronoi: need at least one site");
  if (height == 0 || width == 0) throw std::invalid_argument("voronoi: empty image");
  VoronoiTiling t;
  t.sites.assign(sites.begin(), sites.end());
  t.cell = Grid<std::uint32_t>(height, width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (std::size_t s = 0; s < sites.size(); ++s) {
        const double dy = static_cast<double>(y) - sites[s].y;
        const double dx = static_cast<double>(x) - sites[s].x;
        const double d = dy * dy + dx * dx;
        if (d < best) {
          best = d;
          arg = static_cast<std::uint32_t>(s);
        }
      }
      t.cell.at(y, x) = arg;
    }
  t.labels = LabelMap(height, width, kGrain);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const std::uint32_t c = t.cell.at(y, x);
      const bool edge = (y > 0 && t.cell.at(y - 1, x) != c) || (y + 1 < height && t.cell.at(y + 1, x) != c) ||
                        (x > 0 && t.cell.at(y, x - 1) != c) || (x + 1 < width && t.cell.at(y, x + 1) != c);
      if (edge) t.labels.at(y, x) = kBoundary;
    }
  t.instances = metrics::connected_components(t.labels);
  return t;
}

VoronoiTiling voronoi_labels(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t n_sites) {
  if (n_sites < 1) throw std::invalid_argument("voronoi_labels: n_sites must be >= 1");
  if (height < 8 || width < 8)
    throw std::invalid_argument("voronoi_labels: dimensions must be >= 8, got " + std::to_string(height) + "x" +
                                std::to_string(width));
  if (n_sites > height * width)
    throw std::invalid_argument("voronoi_labels: " + std::to_string(n_sites) + " sites exceed " +
                                std::to_string(height * width) + " pixels");
  Rng rng(seed);
  std::vector<Site> sites(n_sites);
  for (auto& s : sites) {
    s.y = uniform(rng, -0.5, static_cast<double>(height) - 0.5);
    s.x = uniform(rng, -0.5, static_cast<double>(width) - 0.5);
  }
  return voronoi_from_sites(height, width, sites);
}

}  // namespace fedgrain::synth
