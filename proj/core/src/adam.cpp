// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "wearembed/errors.hpp"

namespace wearembed {

AdamState AdamState::for_parameters(std::span<Parameter* const> params) {
  AdamState state;
  for (const Parameter* p : params) {
    state.first_moment.emplace_back(p->value.shape());
    state.second_moment.emplace_back(p->value.shape());
  }
  return state;
}

void adam_update(std::span<Parameter* const> params, AdamState& state, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("adam: optimizer state does not match the parameter list");
  }
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) {
      throw DivergenceError("non-finite gradient in parameter " + p->name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    require_same_shape(m, p.value, "adam");
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p.value[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    p.zero_grad();
  }
}

}  // namespace wearembed
