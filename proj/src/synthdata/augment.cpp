#include "fedgrain/synthdata/augment.hpp"

#include <cmath>
#include <stdexcept>

#include "fedgrain/common/rng.hpp"

namespace fedgrain::synth {

void validate(const ErasingConfig& c) {
  if (!(c.probability >= 0.0 && c.probability <= 1.0))
    throw std::invalid_argument("random_erasing: probability must be in [0, 1]");
  if (!(c.min_area > 0.0 && c.min_area <= c.max_area && c.max_area <= 0.5))
    throw std::invalid_argument("random_erasing: area range must satisfy 0 < min <= max <= 0.5");
  if (!(c.min_aspect > 0.0 && c.min_aspect <= 1.0))
    throw std::invalid_argument("random_erasing: min_aspect must be in (0, 1]");
  if (!(c.constant >= 0.0 && c.constant <= 1.0)) throw std::invalid_argument("random_erasing: fill constant must be in [0, 1]");
}

GrayImage random_erasing(const GrayImage& image, std::uint64_t seed, const ErasingConfig& c, ErasedRegion* region) {
  validate(c);
  ErasedRegion r;
  GrayImage out = image;
  Rng rng(seed);
  const double h = static_cast<double>(image.height()), w = static_cast<double>(image.width());
  const double total = h * w;
  if (uniform01(rng) < c.probability && total > 0) {
    for (int attempt = 0; attempt < 100 && !r.applied; ++attempt) {
      const double frac = uniform(rng, c.min_area, c.max_area);
      const double aspect = std::exp(uniform(rng, std::log(c.min_aspect), -std::log(c.min_aspect)));
      const double eh = std::round(std::sqrt(frac * total * aspect));
      const double ew = std::round(std::sqrt(frac * total / aspect));
      if (eh < 1 || ew < 1 || eh > h || ew > w) continue;
      const double actual = eh * ew / total;
      if (actual < c.min_area || actual > c.max_area) continue;
      r = {true, 0, 0, static_cast<std::size_t>(eh), static_cast<std::size_t>(ew)};
    }
    if (!r.applied) {
      const double side = std::ceil(std::sqrt(c.min_area * total));
      if (side <= h && side <= w && side * side / total <= c.max_area)
        r = {true, 0, 0, static_cast<std::size_t>(side), static_cast<std::size_t>(side)};
    }
    if (r.applied) {
      r.y0 = static_cast<std::size_t>(rng() % (image.height() - r.height + 1));
      r.x0 = static_cast<std::size_t>(rng() % (image.width() - r.width + 1));
      for (std::size_t y = r.y0; y < r.y0 + r.height; ++y)
        for (std::size_t x = r.x0; x < r.x0 + r.width; ++x)
          out.at(y, x) = c.fill == EraseFill::kConstant ? c.constant : uniform01(rng);
    }
  }
  if (region) *region = r;
  return out;
}

}  // namespace fedgrain::synth
