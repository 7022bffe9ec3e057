// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Dense kernels with explicit forward and backward rules.
//
// Sequences are laid out as [steps x channels] row-major tensors. Backward
// functions are pure: they return fresh gradient tensors, and callers fold
// parameter gradients into Parameter::grad with accumulate().

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wearembed/rng.hpp"
#include "wearembed/tensor.hpp"

namespace wearembed {

enum class Activation { kRelu, kSigmoid, kTanh };

/// out = op(a) * op(b) for rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false, bool transpose_b = false);
/// out += alpha * op(a) * op(b); `out` must already have the result shape.
void matmul_accumulate(const Tensor& a, const Tensor& b, Tensor& out, bool transpose_a,
                       bool transpose_b, double alpha = 1.0);

/// Zero-padded ("same") 1-D convolution.
///   input   [steps x in_ch]
///   kernels [k x in_ch x out_ch]
///   bias    [out_ch]
/// out[s, o] = bias[o] + sum_{j,c} input[s*stride + j - (k-1)/2, c] * kernels[j, c, o]
/// giving ceil(steps / stride) output rows. Stride 1 requires odd k.
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride = 1);

struct ConvGrad {
  Tensor input;  // empty when not requested
  Tensor kernels;
  Tensor bias;
};

ConvGrad conv1d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                         std::size_t stride = 1, bool want_input = true);

/// Stride-2 transposed convolution, the adjoint of conv1d(stride = 2).
///   input   [steps x in_ch]
///   kernels [k x out_ch x in_ch]  (the kernel of the adjoint strided conv)
///   bias    [out_ch]
/// Output is [2*steps x out_ch]. With zero bias this equals the input
/// gradient of conv1d(stride = 2) on a 2*steps signal.
Tensor transposed_conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

ConvGrad transposed_conv1d_backward(const Tensor& input, const Tensor& kernels,
                                    const Tensor& grad_out, bool want_input = true);

struct MaxPoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Window 2, stride 2 along the step axis. Ties pick the lower index.
MaxPoolResult maxpool1d(const Tensor& input);
Tensor maxpool1d_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                          const Shape& input_shape);

/// out = weight * input + bias. `input` is [n] or a batch of rows [rows x n];
/// `bias` may be empty.
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct DenseGrad {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

DenseGrad dense_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                         bool want_input = true);

Tensor activation(const Tensor& input, Activation kind);
/// relu uses `input` (subgradient 0 at 0); sigmoid and tanh use `output`.
Tensor activation_backward(const Tensor& input, const Tensor& output, const Tensor& grad_out,
                           Activation kind);

/// Max-subtracted softmax along `axis`.
Tensor softmax_axis(const Tensor& input, std::size_t axis);
Tensor softmax_backward(const Tensor& output, const Tensor& grad_out, std::size_t axis);

/// Mean along `axis`; the axis is removed (a rank-1 input yields shape [1]).
Tensor reduce_mean_axis(const Tensor& input, std::size_t axis);
Tensor reduce_mean_backward(const Tensor& grad_out, const Shape& input_shape, std::size_t axis);

/// param.grad += grad
void accumulate(Parameter& param, const Tensor& grad);

/// Glorot/Xavier uniform: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& values, std::size_t fan_in, std::size_t fan_out, Rng& rng);
/// Uniform with variance gain^2 * 2 / fan_in (relu-preserving when gain is 1).
void he_uniform(Tensor& values, std::size_t fan_in, double gain, Rng& rng);

}  // namespace wearembed
