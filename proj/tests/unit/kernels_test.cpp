// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "wearembed/autoencoder.hpp"
#include "wearembed/errors.hpp"
#include "wearembed/gradcheck.hpp"

namespace wearembed {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

Tensor column(std::initializer_list<double> v) {
  return Tensor({v.size(), 1}, std::vector<double>(v));
}

TEST(Conv1d, SlidingDifferenceExample) {
  const Tensor out = conv1d(column({1, 2, 3, 4, 5}), Tensor({3, 1, 1}, {1, 0, -1}), Tensor({1}));
  EXPECT_EQ(out.storage(), (std::vector<double>{-2, -2, -2, -2, 4}));
}

TEST(Conv1d, IdentityKernelCopiesInput) {
  Rng rng(1);
  const Tensor x = random_tensor({11, 1}, rng);
  Tensor k({5, 1, 1});
  k[2] = 1.0;
  EXPECT_EQ(conv1d(x, k, Tensor({1})), x);
}

TEST(Conv1d, ZeroInputGivesBias) {
  Rng rng(2);
  const Tensor out =
      conv1d(Tensor({6, 2}), random_tensor({3, 2, 3}, rng), Tensor::from({1, -2, 3}));
  for (std::size_t s = 0; s < 6; ++s) {
    EXPECT_EQ(out.at(s, 0), 1);
    EXPECT_EQ(out.at(s, 1), -2);
    EXPECT_EQ(out.at(s, 2), 3);
  }
}

TEST(Conv1d, ChannelMismatchIsRejected) {
  EXPECT_THROW(conv1d(Tensor({4, 2}), Tensor({3, 3, 1}), Tensor({1})), ShapeError);
}

TEST(Conv1d, MatchesNaiveOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t steps = 1 + rng.index(16), in = 1 + rng.index(6), out = 1 + rng.index(6);
    const std::size_t k = 2 * rng.index(4) + 1;
    const Tensor x = random_tensor({steps, in}, rng);
    const Tensor w = random_tensor({k, in, out}, rng);
    const Tensor b = random_tensor({out}, rng);
    EXPECT_LE(max_abs_diff(conv1d(x, w, b), testing::naive_conv1d(x, w, b)), 1e-10);
  }
}

TEST(TransposedConv1d, ScatterExample) {
  const Tensor out = transposed_conv1d(column({1}), Tensor({2, 1, 1}, {1, 1}), Tensor({1}));
  EXPECT_EQ(out.storage(), (std::vector<double>{1, 1}));
}

TEST(TransposedConv1d, ZeroInputGivesBiasAndDoublesLength) {
  Rng rng(4);
  const Tensor out =
      transposed_conv1d(Tensor({5, 3}), random_tensor({5, 2, 3}, rng), Tensor::from({4, 5}));
  ASSERT_EQ(out.shape(), (Shape{10, 2}));
  for (std::size_t s = 0; s < 10; ++s) {
    EXPECT_EQ(out.at(s, 0), 4);
    EXPECT_EQ(out.at(s, 1), 5);
  }
}

TEST(TransposedConv1d, MatchesNaiveOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t steps = 1 + rng.index(8), in = 1 + rng.index(6), out = 1 + rng.index(6);
    const std::size_t k = 1 + rng.index(9);
    const Tensor x = random_tensor({steps, in}, rng);
    const Tensor w = random_tensor({k, out, in}, rng);
    const Tensor b = random_tensor({out}, rng);
    EXPECT_LE(max_abs_diff(transposed_conv1d(x, w, b), testing::naive_transposed_conv1d(x, w, b)),
              1e-10);
  }
}

TEST(TransposedConv1d, IsAdjointOfStridedConv) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t steps = 1 + rng.index(8), in = 1 + rng.index(4), out = 1 + rng.index(4);
    const std::size_t k = 2 * rng.index(4) + 1;
    const Tensor w = random_tensor({k, out, in}, rng);
    const Tensor y = random_tensor({steps, in}, rng);
    const Tensor x = random_tensor({2 * steps, out}, rng);
    // <conv(x), y> == <x, transposed(y)>
    const Tensor cx = conv1d(x, w, Tensor({in}), 2);
    const Tensor ty = transposed_conv1d(y, w, Tensor({out}));
    const double lhs =
        std::inner_product(cx.values().begin(), cx.values().end(), y.values().begin(), 0.0);
    const double rhs =
        std::inner_product(x.values().begin(), x.values().end(), ty.values().begin(), 0.0);
    EXPECT_NEAR(lhs, rhs, 1e-9 * (1 + std::abs(lhs)));
    // Zero-bias transposed output equals the input gradient of the strided conv.
    const ConvGrad g = conv1d_backward(x, w, y, 2);
    EXPECT_LE(max_abs_diff(g.input, ty), 1e-10);
  }
}

TEST(MaxPool1d, Examples) {
  const MaxPoolResult r = maxpool1d(column({3, 1, 4, 1, 5, 9}));
  EXPECT_EQ(r.output.storage(), (std::vector<double>{3, 4, 9}));
  const Tensor back = maxpool1d_backward(column({1, 1, 1}), r.argmax, {6, 1});
  EXPECT_EQ(back.storage(), (std::vector<double>{1, 0, 1, 0, 0, 1}));
  const MaxPoolResult c = maxpool1d(Tensor({4, 2}, 2.5));
  for (double v : c.output.values()) EXPECT_EQ(v, 2.5);
}

TEST(MaxPool1d, TiesRouteToLowerIndex) {
  const MaxPoolResult r = maxpool1d(column({7, 7}));
  EXPECT_EQ(r.argmax, (std::vector<std::size_t>{0}));
}

TEST(MaxPool1d, OddStepsRejected) { EXPECT_THROW(maxpool1d(Tensor({5, 1})), ShapeError); }

TEST(MaxPool1d, MatchesOracleAndConservesGradient) {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t steps = 2 * (1 + rng.index(8)), ch = 1 + rng.index(6);
    const Tensor x = random_tensor({steps, ch}, rng);
    const MaxPoolResult r = maxpool1d(x);
    const testing::NaivePool n = testing::naive_maxpool(x);
    EXPECT_LE(max_abs_diff(r.output, n.output), 1e-10);
    EXPECT_EQ(r.argmax, n.argmax);
    const Tensor g = random_tensor(r.output.shape(), rng);
    const Tensor back = maxpool1d_backward(g, r.argmax, x.shape());
    const double in_sum = std::accumulate(back.values().begin(), back.values().end(), 0.0);
    const double out_sum = std::accumulate(g.values().begin(), g.values().end(), 0.0);
    EXPECT_NEAR(in_sum, out_sum, 1e-12 * (1 + std::abs(out_sum)));
  }
}

TEST(Dense, Examples) {
  EXPECT_EQ(dense(Tensor::from({4, 5}), Tensor({1, 2}, {1, 2}), Tensor::from({3})).storage(),
            (std::vector<double>{17}));
  const Tensor x = Tensor::from({1.5, -2, 3});
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1;
  EXPECT_EQ(dense(x, eye, Tensor({3})), x);
  EXPECT_THROW(dense(x, Tensor({2, 4}), Tensor({2})), ShapeError);
}

TEST(Dense, WeightGradientIsOuterProduct) {
  Rng rng(8);
  const Tensor x = random_tensor({4}, rng);
  const Tensor w = random_tensor({3, 4}, rng);
  const Tensor g = random_tensor({3}, rng);
  const DenseGrad grad = dense_backward(x, w, g);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(grad.weight.at(i, j), g[i] * x[j]);
  }
}

TEST(Dense, MatchesNaiveOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + rng.index(16), n = 1 + rng.index(16);
    const Tensor x = random_tensor({n}, rng);
    const Tensor w = random_tensor({m, n}, rng);
    const Tensor b = random_tensor({m}, rng);
    EXPECT_LE(max_abs_diff(dense(x, w, b), testing::naive_dense(x, w, b)), 1e-10);
  }
}

TEST(Activation, Examples) {
  EXPECT_EQ(activation(Tensor::from({-1, 0, 2}), Activation::kRelu).storage(),
            (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(activation(Tensor::from({0}), Activation::kSigmoid)[0], 0.5);
  EXPECT_EQ(activation(Tensor::from({0}), Activation::kTanh)[0], 0.0);
  const Tensor x = Tensor::from({0});
  const Tensor g = activation_backward(x, activation(x, Activation::kRelu), Tensor::from({1}),
                                       Activation::kRelu);
  EXPECT_EQ(g[0], 0.0);
}

TEST(Softmax, Examples) {
  const Tensor u = softmax_axis(Tensor::from({0, 0, 0}), 0);
  for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const Tensor r = softmax_axis(Tensor::from({std::log(1.0), std::log(2.0), std::log(3.0)}), 0);
  EXPECT_NEAR(r[0], 1.0 / 6, 1e-15);
  EXPECT_NEAR(r[1], 2.0 / 6, 1e-15);
  EXPECT_NEAR(r[2], 3.0 / 6, 1e-15);
  const Tensor s = softmax_axis(Tensor::from({1.0 + 40, 2.0 + 40, 3.0 + 40}), 0);
  const Tensor t = softmax_axis(Tensor::from({1.0, 2.0, 3.0}), 0);
  EXPECT_LE(max_abs_diff(s, t), 1e-15);
}

TEST(Softmax, MatchesNaiveOracleAndNormalises) {
  Rng rng(10);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t rows = 1 + rng.index(16), cols = 1 + rng.index(16);
    const std::size_t axis = rng.index(2);
    const Tensor x = random_tensor({rows, cols}, rng);
    const Tensor y = softmax_axis(x, axis);
    EXPECT_LE(max_abs_diff(y, testing::naive_softmax(x, axis)), 1e-10);
    const std::size_t outer = axis == 1 ? rows : cols, inner = axis == 1 ? cols : rows;
    for (std::size_t o = 0; o < outer; ++o) {
      double total = 0.0;
      for (std::size_t i = 0; i < inner; ++i) {
        const double v = axis == 1 ? y.at(o, i) : y.at(i, o);
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 1.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(ReduceMean, Examples) {
  const Tensor m = reduce_mean_axis(Tensor({2, 2}, {1, 3, 5, 7}), 1);
  EXPECT_EQ(m.storage(), (std::vector<double>{2, 6}));
  EXPECT_EQ(reduce_mean_axis(Tensor({3, 2}, 4.0), 0).storage(), (std::vector<double>{4, 4}));
  const Tensor back = reduce_mean_backward(Tensor({2}, 1.0), {2, 4}, 1);
  for (double v : back.values()) EXPECT_EQ(v, 0.25);
}

// Each kernel's backward rule against independent central differences.
class KernelGradients : public ::testing::TestWithParam<int> {};

double weighted_sum(const Tensor& y, const Tensor& w) {
  return std::inner_product(y.values().begin(), y.values().end(), w.values().begin(), 0.0);
}

TEST_P(KernelGradients, Conv1d) {
  Rng rng(100 + GetParam());
  Parameter x("x", {7, 2}), k("k", {3, 2, 3}), b("b", {3});
  x.value = random_tensor(x.value.shape(), rng, -1, 1);
  k.value = random_tensor(k.value.shape(), rng, -1, 1);
  b.value = random_tensor(b.value.shape(), rng, -1, 1);
  const Tensor w = random_tensor({7, 3}, rng, -1, 1);
  std::vector<Parameter*> params{&x, &k, &b};
  auto report = testing::finite_difference_check(
      [&] { return weighted_sum(conv1d(x.value, k.value, b.value), w); },
      [&] {
        ConvGrad g = conv1d_backward(x.value, k.value, w);
        x.grad = g.input;
        k.grad = g.kernels;
        b.grad = g.bias;
      },
      params);
  EXPECT_LE(report.max_relative_error, 1e-4) << report.worst;
}

TEST_P(KernelGradients, TransposedConv1d) {
  Rng rng(200 + GetParam());
  Parameter x("x", {4, 3}), k("k", {5, 2, 3}), b("b", {2});
  x.value = random_tensor(x.value.shape(), rng, -1, 1);
  k.value = random_tensor(k.value.shape(), rng, -1, 1);
  b.value = random_tensor(b.value.shape(), rng, -1, 1);
  const Tensor w = random_tensor({8, 2}, rng, -1, 1);
  std::vector<Parameter*> params{&x, &k, &b};
  auto report = testing::finite_difference_check(
      [&] { return weighted_sum(transposed_conv1d(x.value, k.value, b.value), w); },
      [&] {
        ConvGrad g = transposed_conv1d_backward(x.value, k.value, w);
        x.grad = g.input;
        k.grad = g.kernels;
        b.grad = g.bias;
      },
      params);
  EXPECT_LE(report.max_relative_error, 1e-4) << report.worst;
}

TEST_P(KernelGradients, MaxPool) {
  Rng rng(300 + GetParam());
  Parameter x("x", {8, 3});
  x.value = random_tensor(x.value.shape(), rng, -1, 1);
  const Tensor w = random_tensor({4, 3}, rng, -1, 1);
  std::vector<Parameter*> params{&x};
  auto report = testing::finite_difference_check(
      [&] { return weighted_sum(maxpool1d(x.value).output, w); },
      [&] { x.grad = maxpool1d_backward(w, maxpool1d(x.value).argmax, x.value.shape()); }, params);
  EXPECT_LE(report.max_relative_error, 1e-4) << report.worst;
}

TEST_P(KernelGradients, DenseAndActivations) {
  Rng rng(400 + GetParam());
  Parameter x("x", {5}), wt("w", {4, 5}), b("b", {4});
  x.value = random_tensor(x.value.shape(), rng, -1, 1);
  wt.value = random_tensor(wt.value.shape(), rng, -1, 1);
  b.value = random_tensor(b.value.shape(), rng, -1, 1);
  const Tensor w = random_tensor({4}, rng, -1, 1);
  std::vector<Parameter*> params{&x, &wt, &b};
  for (Activation kind : {Activation::kRelu, Activation::kSigmoid, Activation::kTanh}) {
    auto report = testing::finite_difference_check(
        [&] { return weighted_sum(activation(dense(x.value, wt.value, b.value), kind), w); },
        [&] {
          const Tensor pre = dense(x.value, wt.value, b.value);
          const Tensor post = activation(pre, kind);
          DenseGrad g = dense_backward(x.value, wt.value, activation_backward(pre, post, w, kind));
          x.grad = g.input;
          wt.grad = g.weight;
          b.grad = g.bias;
        },
        params);
    EXPECT_LE(report.max_relative_error, 1e-4) << report.worst;
  }
}

TEST_P(KernelGradients, SoftmaxAndMean) {
  Rng rng(500 + GetParam());
  Parameter x("x", {4, 5});
  x.value = random_tensor(x.value.shape(), rng, -2, 2);
  for (std::size_t axis : {0u, 1u}) {
    const Tensor w = random_tensor({4, 5}, rng, -1, 1);
    std::vector<Parameter*> params{&x};
    auto report = testing::finite_difference_check(
        [&] { return weighted_sum(softmax_axis(x.value, axis), w); },
        [&] { x.grad = softmax_backward(softmax_axis(x.value, axis), w, axis); }, params);
    EXPECT_LE(report.max_relative_error, 1e-4) << report.worst;
    const Tensor wm = random_tensor({axis == 0 ? 5u : 4u}, rng, -1, 1);
    auto mean_report = testing::finite_difference_check(
        [&] { return weighted_sum(reduce_mean_axis(x.value, axis), wm); },
        [&] { x.grad = reduce_mean_backward(wm, x.value.shape(), axis); }, params);
    EXPECT_LE(mean_report.max_relative_error, 1e-4) << mean_report.worst;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, KernelGradients, ::testing::Range(0, 20));

// The library checker itself: passes on a correct chain, fails when the
// backward rule is off by a factor of two.
TEST(GradientCheck, PassesAndCatchesCorruption) {
  Rng rng(11);
  Parameter w("w", {3, 4}), b("b", {3});
  w.value = random_tensor(w.value.shape(), rng, -1, 1);
  b.value = random_tensor(b.value.shape(), rng, -1, 1);
  const Tensor x = random_tensor({4}, rng, -1, 1);
  std::vector<Parameter*> params{&w, &b};
  Tensor pre, post;
  auto forward = [&] {
    pre = dense(x, w.value, b.value);
    post = activation(pre, Activation::kTanh);
    return Tensor::from({std::accumulate(post.values().begin(), post.values().end(), 0.0)});
  };
  auto backward_with = [&](double factor) {
    return [&, factor] {
      Tensor g = activation_backward(pre, post, Tensor(post.shape(), 1.0), Activation::kTanh);
      g *= factor;
      DenseGrad d = dense_backward(x, w.value, g, false);
      accumulate(w, d.weight);
      accumulate(b, d.bias);
    };
  };
  EXPECT_TRUE(gradient_check(forward, backward_with(1.0), params).passed);
  EXPECT_FALSE(gradient_check(forward, backward_with(2.0), params).passed);
  EXPECT_THROW(gradient_check([&] { return Tensor({2}); }, backward_with(1.0), params),
               std::invalid_argument);
}

TEST(GradientCheck, ConvWithMaskedLossPasses) {
  Rng rng(12);
  Parameter k("k", {3, 1, 2}), b("b", {2}), w("w", {1, 2}), wb("wb", {1});
  for (Parameter* p : {&k, &b, &w, &wb}) p->value = random_tensor(p->value.shape(), rng, -1, 1);
  const Tensor x = random_tensor({8, 1}, rng, -1, 1);
  const std::vector<double> target{1, 0, 2, 0.5, 0, 1, 1, 3};
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 1, 1, 1};
  Tensor conv, recon;
  std::vector<Parameter*> params{&k, &b, &w, &wb};
  auto forward = [&] {
    conv = conv1d(x, k.value, b.value);
    recon = dense(conv, w.value, wb.value).reshape({8});
    return Tensor::from({masked_reconstruction_loss(target, mask, recon.values())});
  };
  auto backward = [&] {
    Tensor g = masked_reconstruction_grad(target, mask, recon.values()).reshape({8, 1});
    DenseGrad d = dense_backward(conv, w.value, g);
    accumulate(w, d.weight);
    accumulate(wb, d.bias);
    ConvGrad c = conv1d_backward(x, k.value, d.input, 1, false);
    accumulate(k, c.kernels);
    accumulate(b, c.bias);
  };
  EXPECT_TRUE(gradient_check(forward, backward, params).passed);
}

TEST(Parameter, GradientStartsAtZero) {
  Parameter p("p", {3, 2});
  for (double v : p.grad.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(p.grad.shape(), p.value.shape());
}

TEST(Rng, DeterministicAndForkable) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng c(42, 50);
  Rng d(42);
  for (int i = 0; i < 50; ++i) d.next_u64();
  EXPECT_EQ(c.next_u64(), d.next_u64());
  EXPECT_NE(Rng(42).fork(1).next_u64(), Rng(42).fork(2).next_u64());
  Rng e(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = e.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(e.index(7), 7u);
  }
}

TEST(Tensor, ShapeContract) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t({2, 3});
  EXPECT_THROW(t.reshape({4}), ShapeError);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
}

}  // namespace
}  // namespace wearembed
