// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/gating.hpp"

#include "wearembed/errors.hpp"
#include "wearembed/kernels.hpp"

namespace wearembed {
namespace {

// Axis averaged away by the pooling step.
std::size_t pooled_axis(GateAxis axis) { return axis == GateAxis::kChannel ? 0 : 1; }

}  // namespace

std::size_t gate_hidden_width(std::size_t dim, std::size_t reduction) {
  const std::size_t h = (dim + reduction - 1) / reduction;
  return h == 0 ? 1 : h;
}

GatingParams::GatingParams(const std::string& prefix, std::size_t dim, std::size_t reduction)
    : w1(prefix + ".w1", {gate_hidden_width(dim, reduction), dim}),
      w2(prefix + ".w2", {dim, gate_hidden_width(dim, reduction)}) {}

void GatingParams::initialize(Rng& rng) {
  glorot_uniform(w1.value, dim(), hidden(), rng);
  glorot_uniform(w2.value, hidden(), dim(), rng);
}

Tensor apply_gate(GateAxis axis, const Tensor& v, const GatingParams& params, GateCache* cache) {
  if (v.rank() != 2)
    throw ShapeError("gate: expected [steps x channels], got " + shape_to_string(v.shape()));
  const std::size_t gated = axis == GateAxis::kChannel ? v.dim(1) : v.dim(0);
  if (gated != params.dim()) {
    throw ShapeError("gate: feature map " + shape_to_string(v.shape()) + " vs gate width " +
                     std::to_string(params.dim()));
  }
  Tensor pooled = reduce_mean_axis(v, pooled_axis(axis));
  Tensor hidden_pre = dense(pooled, params.w1.value, {});
  Tensor hidden = activation(hidden_pre, Activation::kRelu);
  Tensor gate = activation(dense(hidden, params.w2.value, {}), Activation::kSigmoid);

  Tensor out(v.shape());
  const std::size_t steps = v.dim(0);
  const std::size_t channels = v.dim(1);
  for (std::size_t s = 0; s < steps; ++s) {
    const double* in = v.row(s);
    double* dst = out.row(s);
    if (axis == GateAxis::kChannel) {
      for (std::size_t c = 0; c < channels; ++c) dst[c] = in[c] * gate[c];
    } else {
      const double a = gate[s];
      for (std::size_t c = 0; c < channels; ++c) dst[c] = in[c] * a;
    }
  }
  if (cache) {
    cache->input = v;
    cache->pooled = std::move(pooled);
    cache->hidden_pre = std::move(hidden_pre);
    cache->hidden = std::move(hidden);
    cache->gate = std::move(gate);
  }
  return out;
}

Tensor apply_gate_backward(GateAxis axis, GatingParams& params, const GateCache& cache,
                           const Tensor& grad_out) {
  const Tensor& v = cache.input;
  require_same_shape(v, grad_out, "gate backward");
  const std::size_t steps = v.dim(0);
  const std::size_t channels = v.dim(1);

  Tensor grad_in(v.shape());
  Tensor grad_gate(cache.gate.shape());
  for (std::size_t s = 0; s < steps; ++s) {
    const double* in = v.row(s);
    const double* g = grad_out.row(s);
    double* dst = grad_in.row(s);
    if (axis == GateAxis::kChannel) {
      for (std::size_t c = 0; c < channels; ++c) {
        dst[c] = g[c] * cache.gate[c];
        grad_gate[c] += g[c] * in[c];
      }
    } else {
      const double a = cache.gate[s];
      double acc = 0.0;
      for (std::size_t c = 0; c < channels; ++c) {
        dst[c] = g[c] * a;
        acc += g[c] * in[c];
      }
      grad_gate[s] = acc;
    }
  }

  const Tensor grad_gate_pre = activation_backward({}, cache.gate, grad_gate, Activation::kSigmoid);
  DenseGrad second = dense_backward(cache.hidden, params.w2.value, grad_gate_pre);
  accumulate(params.w2, second.weight);
  const Tensor grad_hidden_pre =
      activation_backward(cache.hidden_pre, cache.hidden, second.input, Activation::kRelu);
  DenseGrad first = dense_backward(cache.pooled, params.w1.value, grad_hidden_pre);
  accumulate(params.w1, first.weight);
  grad_in += reduce_mean_backward(first.input, v.shape(), pooled_axis(axis));
  return grad_in;
}

}  // namespace wearembed
