// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wearembed/tensor.hpp"

namespace wearembed {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;  // one per parameter, zero-initialised
  std::vector<Tensor> second_moment;

  /// Zero moments shaped like `params`, step 0.
  static AdamState for_parameters(std::span<Parameter* const> params);
};

/// One bias-corrected Adam step, then every gradient is zeroed. A non-finite
/// gradient throws DivergenceError naming the parameter before anything is
/// modified.
void adam_update(std::span<Parameter* const> params, AdamState& state, double learning_rate);

}  // namespace wearembed
