#pragma once

#include <cstdint>

#include "fedgrain/autodiff/param_set.hpp"

namespace fedgrain::ad {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  // Adam first/second moments; empty until the first step.
  ParamSet m;
  ParamSet v;

  static OptimizerState sgd(double learning_rate);
  static OptimizerState adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                             double epsilon = 1e-8);
};

// w - lr * g, elementwise.
ParamSet sgd_step(const ParamSet& w, const ParamSet& g, double learning_rate);

// Bias-corrected Adam; advances state.step_count by one.
ParamSet adam_step(OptimizerState& state, const ParamSet& w, const ParamSet& g);

// Dispatches on state.kind. Plain SGD also counts steps.
ParamSet optimizer_step(OptimizerState& state, const ParamSet& w, const ParamSet& g);

}  // namespace fedgrain::ad
