// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Squeeze-style gates over a [steps x channels] feature map.
//
// The channel gate averages over steps, the temporal gate over channels.
// Either way the pooled vector z goes through
//   a = sigmoid(w2 * relu(w1 * z))
// with no bias terms, and the input is scaled by a along the gated axis.

#pragma once

#include <cstddef>
#include <string>

#include "wearembed/rng.hpp"
#include "wearembed/tensor.hpp"

namespace wearembed {

enum class GateAxis { kChannel, kTemporal };

/// ceil(dim / reduction), at least 1.
std::size_t gate_hidden_width(std::size_t dim, std::size_t reduction = 4);

struct GatingParams {
  GatingParams() = default;
  GatingParams(const std::string& prefix, std::size_t dim, std::size_t reduction = 4);

  std::size_t dim() const { return w1.value.dim(1); }
  std::size_t hidden() const { return w1.value.dim(0); }
  void initialize(Rng& rng);

  Parameter w1;  // [hidden x dim]
  Parameter w2;  // [dim x hidden]
};

struct GateCache {
  Tensor input;
  Tensor pooled;
  Tensor hidden_pre;
  Tensor hidden;
  Tensor gate;
};

Tensor apply_gate(GateAxis axis, const Tensor& v, const GatingParams& params,
                  GateCache* cache = nullptr);
/// Accumulates into params' gradients and returns the input gradient.
Tensor apply_gate_backward(GateAxis axis, GatingParams& params, const GateCache& cache,
                           const Tensor& grad_out);

inline Tensor channel_gate(const Tensor& v, const GatingParams& params,
                           GateCache* cache = nullptr) {
  return apply_gate(GateAxis::kChannel, v, params, cache);
}
inline Tensor temporal_gate(const Tensor& v, const GatingParams& params,
                            GateCache* cache = nullptr) {
  return apply_gate(GateAxis::kTemporal, v, params, cache);
}

}  // namespace wearembed
