#pragma once

// Random inputs and small helpers shared by the gradient and style tests.

#include <utility>

#include "fedgrain/autodiff/gradcheck.hpp"
#include "fedgrain/autodiff/graph.hpp"
#include "fedgrain/autodiff/layers.hpp"
#include "fedgrain/common/rng.hpp"
#include "fedgrain/imaging/grid.hpp"

namespace fedgrain::helpers {

using namespace fedgrain::ad;

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

// Weighted sum of a layer's output with a fixed random probe, as a scalar loss.
inline LossBuilder layer_loss(LayerSpec spec, std::size_t n_params, std::size_t n_inputs, Tensor probe) {
  return [=](Graph& g, const Binding& b) {
    std::vector<NodeId> params, inputs;
    for (std::size_t i = 0; i < n_params; ++i) params.push_back(b.node(i));
    for (std::size_t i = 0; i < n_inputs; ++i) inputs.push_back(b.node(n_params + i));
    const NodeId out = apply_layer(g, spec, params, inputs);
    return g.sum(g.mul(out, g.constant(probe)));
  };
}

// Inputs keep clear of the relu/leaky-relu kink and of max-pool ties so that
// central differences with step 1e-5 never straddle a non-differentiable point.
inline Tensor kink_free(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) {
    const double mag = uniform(rng, 0.05, 1.0);
    v = uniform01(rng) < 0.5 ? -mag : mag;
  }
  return t;
}

inline GrayImage random_image(std::size_t h, std::size_t w, Rng& rng) {
  GrayImage img(h, w);
  for (auto& v : img.pixels()) v = uniform01(rng);
  return img;
}

inline LabelMap random_labels(std::size_t h, std::size_t w, Rng& rng) {
  LabelMap l(h, w);
  for (auto& v : l.pixels()) v = static_cast<std::uint8_t>(rng() % 2);
  return l;
}

inline std::pair<double, double> category_means(const GrayImage& img, const LabelMap& labels) {
  double sb = 0, sg = 0, nb = 0, ng = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (labels[i] == kGrain) {
      sg += img[i];
      ++ng;
    } else {
      sb += img[i];
      ++nb;
    }
  }
  return {sb / nb, sg / ng};
}

// Fresh models have zero biases, which parks every pre-activation fed by a
// dead (all-zero) patch exactly on a ReLU kink. Finite differences need
// generic parameters.
inline ad::ParamSet with_random_biases(ad::ParamSet p, Rng& rng) {
  for (auto& e : p)
    if (e.value.rank() == 1)
      for (double& v : e.value.data()) v = uniform(rng, -0.3, 0.3);
  return p;
}

}  // namespace fedgrain::helpers
