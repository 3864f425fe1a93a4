#pragma once

#include <cstddef>

#include "fedgrain/autodiff/tensor.hpp"
#include "fedgrain/common/rng.hpp"

namespace fedgrain::ad {

// Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data()) v = uniform(rng, -a, a);
  return t;
}

// Conv weight [out, in, k, k]: fan_in = in*k*k, fan_out = out*k*k.
inline Tensor conv_weight(std::size_t out, std::size_t in, std::size_t k, Rng& rng) {
  return glorot_uniform(Shape{out, in, k, k}, in * k * k, out * k * k, rng);
}

}  // namespace fedgrain::ad
