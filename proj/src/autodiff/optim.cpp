#include "fedgrain/autodiff/optim.hpp"

#include <cmath>
#include <string>

namespace fedgrain::ad {

OptimizerState OptimizerState::sgd(double learning_rate) {
  OptimizerState s;
  s.kind = OptimizerKind::kSgd;
  s.learning_rate = learning_rate;
  return s;
}

OptimizerState OptimizerState::adam(double learning_rate, double beta1, double beta2, double epsilon) {
  OptimizerState s;
  s.kind = OptimizerKind::kAdam;
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

ParamSet sgd_step(const ParamSet& w, const ParamSet& g, double learning_rate) {
  require_compatible(w, g, "sgd_step");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("sgd_step: learning rate must be >= 0");
  ParamSet out = w;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto dst = out[i].value.data();
    auto grad = g[i].value.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] -= learning_rate * grad[k];
  }
  return out;
}

ParamSet adam_step(OptimizerState& state, const ParamSet& w, const ParamSet& g) {
  if (state.kind != OptimizerKind::kAdam) throw std::invalid_argument("adam_step: state is not adam");
  require_compatible(w, g, "adam_step");
  if (state.m.empty()) {
    state.m = w.zeros_like();
    state.v = w.zeros_like();
  }
  require_compatible(w, state.m, "adam_step (moments)");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  ParamSet out = w;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto dst = out[i].value.data();
    auto grad = g[i].value.data();
    auto m = state.m[i].value.data();
    auto v = state.v[i].value.data();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * grad[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * grad[k] * grad[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      dst[k] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
  return out;
}

ParamSet optimizer_step(OptimizerState& state, const ParamSet& w, const ParamSet& g) {
  if (state.kind == OptimizerKind::kAdam) return adam_step(state, w, g);
  state.step_count += 1;
  return sgd_step(w, g, state.learning_rate);
}

}  // namespace fedgrain::ad
