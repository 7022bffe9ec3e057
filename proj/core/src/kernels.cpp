// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "wearembed/errors.hpp"

namespace wearembed {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutableMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutableMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MutableMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_to_string(t.shape()));
  }
}

// cols[s, j*C + c] = x[s*stride + j - pad, c], zero outside [0, steps).
Tensor im2col(const Tensor& x, std::size_t k, std::size_t stride, std::size_t out_steps) {
  const std::size_t steps = x.dim(0);
  const std::size_t channels = x.dim(1);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
  Tensor cols({out_steps, k * channels});
  for (std::size_t s = 0; s < out_steps; ++s) {
    double* dst = cols.row(s);
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s * stride + j) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
      std::copy_n(x.row(static_cast<std::size_t>(src)), channels, dst + j * channels);
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-add columns back onto a [steps x channels] signal.
void col2im_add(const Tensor& cols, std::size_t k, std::size_t stride, Tensor& x) {
  const std::size_t steps = x.dim(0);
  const std::size_t channels = x.dim(1);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
  for (std::size_t s = 0; s < cols.dim(0); ++s) {
    const double* src = cols.row(s);
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(s * stride + j) - pad;
      if (dst < 0 || dst >= static_cast<std::ptrdiff_t>(steps)) continue;
      double* out = x.row(static_cast<std::size_t>(dst));
      const double* in = src + j * channels;
      for (std::size_t c = 0; c < channels; ++c) out[c] += in[c];
    }
  }
}

void add_bias_rows(Tensor& out, const Tensor& bias) {
  const std::size_t cols = out.dim(1);
  for (std::size_t r = 0; r < out.dim(0); ++r) {
    double* row = out.row(r);
    for (std::size_t c = 0; c < cols; ++c) row[c] += bias[c];
  }
}

Tensor column_sums(const Tensor& m) {
  Tensor sums({m.dim(1)});
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    const double* row = m.row(r);
    for (std::size_t c = 0; c < m.dim(1); ++c) sums[c] += row[c];
  }
  return sums;
}

void check_conv_shapes(const Tensor& input, const Tensor& kernels, std::size_t kernel_in_axis,
                       const char* what) {
  require_rank(input, 2, what);
  require_rank(kernels, 3, what);
  if (kernels.dim(kernel_in_axis) != input.dim(1)) {
    throw ShapeError(std::string(what) + ": input " + shape_to_string(input.shape()) + " has " +
                     std::to_string(input.dim(1)) + " channels but kernels " +
                     shape_to_string(kernels.shape()) + " expect " +
                     std::to_string(kernels.dim(kernel_in_axis)));
  }
  if (input.dim(0) == 0) throw ShapeError(std::string(what) + ": empty input");
}

struct Extent {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

Extent split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(shape));
  }
  Extent e;
  for (std::size_t i = 0; i < axis; ++i) e.outer *= shape[i];
  e.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) e.inner *= shape[i];
  return e;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t rows = transpose_a ? a.dim(1) : a.dim(0);
  const std::size_t cols = transpose_b ? b.dim(0) : b.dim(1);
  Tensor out({rows, cols});
  matmul_accumulate(a, b, out, transpose_a, transpose_b);
  return out;
}

void matmul_accumulate(const Tensor& a, const Tensor& b, Tensor& out, bool transpose_a,
                       bool transpose_b, double alpha) {
  const std::size_t rows = transpose_a ? a.dim(1) : a.dim(0);
  const std::size_t inner_a = transpose_a ? a.dim(0) : a.dim(1);
  const std::size_t inner_b = transpose_b ? b.dim(1) : b.dim(0);
  const std::size_t cols = transpose_b ? b.dim(0) : b.dim(1);
  if (inner_a != inner_b || out.rank() != 2 || out.dim(0) != rows || out.dim(1) != cols) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) +
                     (transpose_a ? "^T" : "") + " * " + shape_to_string(b.shape()) +
                     (transpose_b ? "^T" : "") + " -> " + shape_to_string(out.shape()));
  }
  const auto ma = as_matrix(a, a.dim(0), a.dim(1));
  const auto mb = as_matrix(b, b.dim(0), b.dim(1));
  auto mo = as_matrix(out, rows, cols);
  if (!transpose_a && !transpose_b) {
    mo.noalias() += alpha * ma * mb;
  } else if (transpose_a && !transpose_b) {
    mo.noalias() += alpha * ma.transpose() * mb;
  } else if (!transpose_a && transpose_b) {
    mo.noalias() += alpha * ma * mb.transpose();
  } else {
    mo.noalias() += alpha * ma.transpose() * mb.transpose();
  }
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride) {
  check_conv_shapes(input, kernels, 1, "conv1d");
  const std::size_t k = kernels.dim(0);
  const std::size_t out_ch = kernels.dim(2);
  if (stride == 0) throw std::invalid_argument("conv1d: stride must be positive");
  if (stride == 1 && k % 2 == 0) {
    throw ShapeError("conv1d: same padding needs an odd kernel width, got " + std::to_string(k));
  }
  if (bias.size() != out_ch) {
    throw ShapeError("conv1d: bias " + shape_to_string(bias.shape()) + " vs " +
                     std::to_string(out_ch) + " output channels");
  }
  const std::size_t out_steps = (input.dim(0) + stride - 1) / stride;
  const Tensor cols = im2col(input, k, stride, out_steps);
  const Tensor kmat = kernels.reshaped({k * input.dim(1), out_ch});
  Tensor out = matmul(cols, kmat);
  add_bias_rows(out, bias);
  return out;
}

ConvGrad conv1d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                         std::size_t stride, bool want_input) {
  check_conv_shapes(input, kernels, 1, "conv1d_backward");
  const std::size_t k = kernels.dim(0);
  const std::size_t in_ch = input.dim(1);
  const std::size_t out_ch = kernels.dim(2);
  const std::size_t out_steps = (input.dim(0) + stride - 1) / stride;
  if (grad_out.rank() != 2 || grad_out.dim(0) != out_steps || grad_out.dim(1) != out_ch) {
    throw ShapeError("conv1d_backward: gradient " + shape_to_string(grad_out.shape()) +
                     " does not match output [" + std::to_string(out_steps) + " x " +
                     std::to_string(out_ch) + "]");
  }
  const Tensor kmat = kernels.reshaped({k * in_ch, out_ch});
  ConvGrad grad;
  const Tensor cols = im2col(input, k, stride, out_steps);
  grad.kernels = matmul(cols, grad_out, true, false).reshape(kernels.shape());
  grad.bias = column_sums(grad_out);
  if (want_input) {
    const Tensor grad_cols = matmul(grad_out, kmat, false, true);
    grad.input = Tensor(input.shape());
    col2im_add(grad_cols, k, stride, grad.input);
  }
  return grad;
}

Tensor transposed_conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  check_conv_shapes(input, kernels, 2, "transposed_conv1d");
  const std::size_t k = kernels.dim(0);
  const std::size_t out_ch = kernels.dim(1);
  if (bias.size() != out_ch) {
    throw ShapeError("transposed_conv1d: bias " + shape_to_string(bias.shape()) + " vs " +
                     std::to_string(out_ch) + " output channels");
  }
  const Tensor kmat = kernels.reshaped({k * out_ch, input.dim(1)});
  const Tensor cols = matmul(input, kmat, false, true);
  Tensor out({2 * input.dim(0), out_ch});
  col2im_add(cols, k, 2, out);
  add_bias_rows(out, bias);
  return out;
}

ConvGrad transposed_conv1d_backward(const Tensor& input, const Tensor& kernels,
                                    const Tensor& grad_out, bool want_input) {
  check_conv_shapes(input, kernels, 2, "transposed_conv1d_backward");
  const std::size_t k = kernels.dim(0);
  const std::size_t out_ch = kernels.dim(1);
  const std::size_t in_ch = input.dim(1);
  if (grad_out.rank() != 2 || grad_out.dim(0) != 2 * input.dim(0) || grad_out.dim(1) != out_ch) {
    throw ShapeError("transposed_conv1d_backward: gradient " + shape_to_string(grad_out.shape()) +
                     " does not match output");
  }
  const Tensor kmat = kernels.reshaped({k * out_ch, in_ch});
  const Tensor grad_cols = im2col(grad_out, k, 2, input.dim(0));
  ConvGrad grad;
  grad.kernels = matmul(grad_cols, input, true, false).reshape(kernels.shape());
  grad.bias = column_sums(grad_out);
  if (want_input) grad.input = matmul(grad_cols, kmat);
  return grad;
}

MaxPoolResult maxpool1d(const Tensor& input) {
  require_rank(input, 2, "maxpool1d");
  const std::size_t steps = input.dim(0);
  const std::size_t channels = input.dim(1);
  if (steps % 2 != 0) {
    throw ShapeError("maxpool1d: step count must be even, got " + std::to_string(steps));
  }
  MaxPoolResult result{Tensor({steps / 2, channels}), {}};
  result.argmax.resize(result.output.size());
  for (std::size_t s = 0; s < steps / 2; ++s) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t first = (2 * s) * channels + c;
      const std::size_t second = first + channels;
      const std::size_t pick = input[second] > input[first] ? second : first;
      result.output.at(s, c) = input[pick];
      result.argmax[s * channels + c] = pick;
    }
  }
  return result;
}

Tensor maxpool1d_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                          const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool1d_backward: argmax/gradient size mismatch");
  }
  Tensor grad_in(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad_in[argmax[i]] += grad_out[i];
  return grad_in;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "dense");
  const std::size_t m = weight.dim(0);
  const std::size_t n = weight.dim(1);
  if (input.rank() == 0 || input.shape().back() != n || input.rank() > 2) {
    throw ShapeError("dense: input " + shape_to_string(input.shape()) + " vs weight " +
                     shape_to_string(weight.shape()));
  }
  if (!bias.empty() && bias.size() != m) {
    throw ShapeError("dense: bias " + shape_to_string(bias.shape()) + " vs weight " +
                     shape_to_string(weight.shape()));
  }
  const std::size_t rows = input.rank() == 2 ? input.dim(0) : 1;
  Tensor out({rows, m});
  matmul_accumulate(input.reshaped({rows, n}), weight, out, false, true);
  if (!bias.empty()) add_bias_rows(out, bias);
  if (input.rank() == 1) out.reshape({m});
  return out;
}

DenseGrad dense_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                         bool want_input) {
  const std::size_t m = weight.dim(0);
  const std::size_t n = weight.dim(1);
  const std::size_t rows = input.rank() == 2 ? input.dim(0) : 1;
  if (grad_out.size() != rows * m || input.size() != rows * n) {
    throw ShapeError("dense_backward: gradient " + shape_to_string(grad_out.shape()) +
                     " vs weight " + shape_to_string(weight.shape()));
  }
  const Tensor g = grad_out.reshaped({rows, m});
  DenseGrad grad;
  grad.weight = matmul(g, input.reshaped({rows, n}), true, false);
  grad.bias = column_sums(g);
  if (want_input) grad.input = matmul(g, weight).reshape(input.shape());
  return grad;
}

Tensor activation(const Tensor& input, Activation kind) {
  Tensor out(input.shape());
  const std::size_t size = input.size();
  switch (kind) {
    case Activation::kRelu:
      // NaN passes through so divergence stays visible downstream.
      for (std::size_t i = 0; i < size; ++i) out[i] = input[i] < 0.0 ? 0.0 : input[i];
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < size; ++i) {
        const double x = input[i];
        // Split by sign so exp never overflows.
        out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      }
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::tanh(input[i]);
      break;
  }
  return out;
}

Tensor activation_backward(const Tensor& input, const Tensor& output, const Tensor& grad_out,
                           Activation kind) {
  Tensor grad(grad_out.shape());
  const std::size_t size = grad_out.size();
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < size; ++i) grad[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < size; ++i) grad[i] = grad_out[i] * output[i] * (1.0 - output[i]);
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < size; ++i) {
        grad[i] = grad_out[i] * (1.0 - output[i] * output[i]);
      }
      break;
  }
  return grad;
}

Tensor softmax_axis(const Tensor& input, std::size_t axis) {
  const Extent e = split_axis(input.shape(), axis);
  Tensor out(input.shape());
  for (std::size_t o = 0; o < e.outer; ++o) {
    for (std::size_t i = 0; i < e.inner; ++i) {
      const std::size_t base = o * e.length * e.inner + i;
      double peak = input[base];
      for (std::size_t a = 1; a < e.length; ++a) peak = std::max(peak, input[base + a * e.inner]);
      double total = 0.0;
      for (std::size_t a = 0; a < e.length; ++a) {
        const double v = std::exp(input[base + a * e.inner] - peak);
        out[base + a * e.inner] = v;
        total += v;
      }
      for (std::size_t a = 0; a < e.length; ++a) out[base + a * e.inner] /= total;
    }
  }
  return out;
}

Tensor softmax_backward(const Tensor& output, const Tensor& grad_out, std::size_t axis) {
  require_same_shape(output, grad_out, "softmax_backward");
  const Extent e = split_axis(output.shape(), axis);
  Tensor grad(output.shape());
  for (std::size_t o = 0; o < e.outer; ++o) {
    for (std::size_t i = 0; i < e.inner; ++i) {
      const std::size_t base = o * e.length * e.inner + i;
      double dot = 0.0;
      for (std::size_t a = 0; a < e.length; ++a) {
        dot += output[base + a * e.inner] * grad_out[base + a * e.inner];
      }
      for (std::size_t a = 0; a < e.length; ++a) {
        const std::size_t idx = base + a * e.inner;
        grad[idx] = output[idx] * (grad_out[idx] - dot);
      }
    }
  }
  return grad;
}

Tensor reduce_mean_axis(const Tensor& input, std::size_t axis) {
  const Extent e = split_axis(input.shape(), axis);
  Shape out_shape = input.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  const double inv = 1.0 / static_cast<double>(e.length);
  for (std::size_t o = 0; o < e.outer; ++o) {
    for (std::size_t a = 0; a < e.length; ++a) {
      const double* src = input.data() + (o * e.length + a) * e.inner;
      double* dst = out.data() + o * e.inner;
      for (std::size_t i = 0; i < e.inner; ++i) dst[i] += src[i];
    }
  }
  out *= inv;
  return out;
}

Tensor reduce_mean_backward(const Tensor& grad_out, const Shape& input_shape, std::size_t axis) {
  const Extent e = split_axis(input_shape, axis);
  if (grad_out.size() != e.outer * e.inner) {
    throw ShapeError("reduce_mean_backward: gradient " + shape_to_string(grad_out.shape()) +
                     " vs input " + shape_to_string(input_shape));
  }
  Tensor grad(input_shape);
  const double inv = 1.0 / static_cast<double>(e.length);
  for (std::size_t o = 0; o < e.outer; ++o) {
    for (std::size_t a = 0; a < e.length; ++a) {
      double* dst = grad.data() + (o * e.length + a) * e.inner;
      const double* src = grad_out.data() + o * e.inner;
      for (std::size_t i = 0; i < e.inner; ++i) dst[i] = src[i] * inv;
    }
  }
  return grad;
}

void accumulate(Parameter& param, const Tensor& grad) {
  if (param.grad.size() != grad.size()) {
    throw ShapeError("accumulate into " + param.name + ": " + shape_to_string(grad.shape()) +
                     " vs " + shape_to_string(param.grad.shape()));
  }
  double* dst = param.grad.data();
  const double* src = grad.data();
  for (std::size_t i = 0; i < grad.size(); ++i) dst[i] += src[i];
}

void glorot_uniform(Tensor& values, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : values.values()) v = rng.uniform(-limit, limit);
}

void he_uniform(Tensor& values, std::size_t fan_in, double gain, Rng& rng) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : values.values()) v = rng.uniform(-limit, limit);
}

}  // namespace wearembed
