// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/autoencoder.hpp"

#include <numbers>
#include <stdexcept>

#include "wearembed/errors.hpp"
#include "wearembed/kernels.hpp"

namespace wearembed {
namespace {

std::string block_name(const char* part, std::size_t b) {
  return std::string(part) + ".block" + std::to_string(b);
}

void collect(ConvBlockParams& block, std::vector<Parameter*>& out) {
  out.push_back(&block.kernels);
  out.push_back(&block.bias);
  if (block.channel_gate) {
    out.push_back(&block.channel_gate->w1);
    out.push_back(&block.channel_gate->w2);
  }
  if (block.temporal_gate) {
    out.push_back(&block.temporal_gate->w1);
    out.push_back(&block.temporal_gate->w2);
  }
}

// relu, then the optional gates. Fills the cache when given.
Tensor activate_and_gate(const ConvBlockParams& block, Tensor conv, ConvBlockCache* cache) {
  Tensor x = activation(conv, Activation::kRelu);
  if (cache) cache->activated = x;
  if (block.channel_gate) {
    x = channel_gate(x, *block.channel_gate, cache ? &cache->channel : nullptr);
  }
  if (block.temporal_gate) {
    x = temporal_gate(x, *block.temporal_gate, cache ? &cache->temporal : nullptr);
  }
  return x;
}

// Inverse of activate_and_gate; returns the gradient wrt the conv output.
Tensor activate_and_gate_backward(ConvBlockParams& block, const ConvBlockCache& cache,
                                  Tensor grad) {
  if (block.temporal_gate) {
    grad = apply_gate_backward(GateAxis::kTemporal, *block.temporal_gate, cache.temporal, grad);
  }
  if (block.channel_gate) {
    grad = apply_gate_backward(GateAxis::kChannel, *block.channel_gate, cache.channel, grad);
  }
  return activation_backward(cache.activated, cache.activated, grad, Activation::kRelu);
}

}  // namespace

void validate(const ArchConfig& c) {
  if (c.kernel_widths.empty() || c.kernel_widths.size() != c.channels.size()) {
    throw std::invalid_argument("architecture needs matching, non-empty kernel and channel lists");
  }
  for (std::size_t k : c.kernel_widths) {
    if (k % 2 == 0) throw std::invalid_argument("kernel widths must be odd");
  }
  for (std::size_t ch : c.channels) {
    if (ch == 0) throw std::invalid_argument("channel counts must be positive");
  }
  if (c.blocks() >= 63 || c.input_steps == 0 ||
      c.input_steps % (std::size_t{1} << c.blocks()) != 0) {
    throw std::invalid_argument("input_steps " + std::to_string(c.input_steps) +
                                " is not divisible by 2^" + std::to_string(c.blocks()));
  }
  if (c.embedding_dim == 0 || c.gate_reduction == 0 || !(c.input_scale > 0.0)) {
    throw std::invalid_argument("embedding_dim, gate_reduction and input_scale must be positive");
  }
}

DayAutoencoder::DayAutoencoder(ArchConfig config) : config_(std::move(config)) {
  validate(config_);
  const std::size_t n = config_.blocks();
  const std::size_t r = config_.gate_reduction;

  std::size_t steps = config_.input_steps;
  std::size_t in_ch = 1;
  for (std::size_t b = 0; b < n; ++b) {
    const std::string name = block_name("encoder", b);
    const std::size_t k = config_.kernel_widths[b];
    const std::size_t out_ch = config_.channels[b];
    ConvBlockParams block{Parameter(name + ".kernels", {k, in_ch, out_ch}),
                          Parameter(name + ".bias", {out_ch}),
                          GatingParams(name + ".channel_gate", out_ch, r),
                          GatingParams(name + ".temporal_gate", steps, r)};
    encoder_.blocks.push_back(std::move(block));
    in_ch = out_ch;
    steps /= 2;
  }
  encoder_.head_weight =
      Parameter("encoder.head.weight", {config_.embedding_dim, config_.flatten_dim()});
  encoder_.head_bias = Parameter("encoder.head.bias", {config_.embedding_dim});

  decoder_.uncompress_weight =
      Parameter("decoder.uncompress.weight", {config_.flatten_dim(), config_.embedding_dim});
  decoder_.uncompress_bias = Parameter("decoder.uncompress.bias", {config_.flatten_dim()});
  steps = config_.bottleneck_steps();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t mirror = n - 1 - i;
    const std::string name = block_name("decoder", i);
    const std::size_t k = config_.kernel_widths[mirror];
    const std::size_t in = config_.channels[mirror];
    const std::size_t out = mirror == 0 ? 1 : config_.channels[mirror - 1];
    steps *= 2;
    ConvBlockParams block{Parameter(name + ".kernels", {k, out, in}),
                          Parameter(name + ".bias", {out}), std::nullopt, std::nullopt};
    if (i + 1 < n) {
      block.channel_gate.emplace(name + ".channel_gate", out, r);
      block.temporal_gate.emplace(name + ".temporal_gate", steps, r);
    }
    decoder_.blocks.push_back(std::move(block));
  }
}

namespace {
// A freshly initialised gate outputs about 0.5, so each gate attached to a
// block halves its activations; the kernel gain undoes that.
double gate_gain(const ConvBlockParams& block) {
  return (block.channel_gate ? 2.0 : 1.0) * (block.temporal_gate ? 2.0 : 1.0);
}
}  // namespace

void DayAutoencoder::initialize(Rng& rng) {
  for (auto& block : encoder_.blocks) {
    const auto& s = block.kernels.value.shape();  // [k x in x out]
    // Max-pooling pairs of relu outputs lifts the scale by about sqrt(2).
    he_uniform(block.kernels.value, s[0] * s[1], gate_gain(block) / std::numbers::sqrt2, rng);
    block.bias.value.fill(0.0);
    block.channel_gate->initialize(rng);
    block.temporal_gate->initialize(rng);
  }
  glorot_uniform(encoder_.head_weight.value, config_.flatten_dim(), config_.embedding_dim, rng);
  encoder_.head_bias.value.fill(0.0);

  glorot_uniform(decoder_.uncompress_weight.value, config_.embedding_dim, config_.flatten_dim(),
                 rng);
  decoder_.uncompress_bias.value.fill(0.0);
  for (auto& block : decoder_.blocks) {
    const auto& s = block.kernels.value.shape();  // [k x out x in]
    // Stride 2 transposed: each output sums about k/2 taps per input channel.
    he_uniform(block.kernels.value, (s[0] * s[2] + 1) / 2, gate_gain(block), rng);
    block.bias.value.fill(0.0);
    if (block.channel_gate) block.channel_gate->initialize(rng);
    if (block.temporal_gate) block.temporal_gate->initialize(rng);
  }
}

void DayAutoencoder::set_output_level(double level) {
  decoder_.blocks.back().bias.value.fill(level);
}

std::vector<Parameter*> DayAutoencoder::encoder_parameters() {
  std::vector<Parameter*> out;
  for (auto& block : encoder_.blocks) collect(block, out);
  out.push_back(&encoder_.head_weight);
  out.push_back(&encoder_.head_bias);
  return out;
}

std::vector<Parameter*> DayAutoencoder::decoder_parameters() {
  std::vector<Parameter*> out{&decoder_.uncompress_weight, &decoder_.uncompress_bias};
  for (auto& block : decoder_.blocks) collect(block, out);
  return out;
}

std::vector<Parameter*> DayAutoencoder::parameters() {
  auto out = encoder_parameters();
  auto dec = decoder_parameters();
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

Tensor DayAutoencoder::encode(const Tensor& input, EncoderCache* cache) const {
  if (input.rank() != 2 || input.dim(0) != config_.input_steps || input.dim(1) != 1) {
    throw ShapeError("encode: expected [" + std::to_string(config_.input_steps) +
                     " x 1] input, got " + shape_to_string(input.shape()));
  }
  if (cache) cache->blocks.assign(encoder_.blocks.size(), {});
  Tensor x = input;
  for (std::size_t b = 0; b < encoder_.blocks.size(); ++b) {
    const auto& block = encoder_.blocks[b];
    ConvBlockCache* bc = cache ? &cache->blocks[b] : nullptr;
    Tensor gated = activate_and_gate(block, conv1d(x, block.kernels.value, block.bias.value), bc);
    MaxPoolResult pooled = maxpool1d(gated);
    if (bc) {
      bc->input = std::move(x);
      bc->argmax = std::move(pooled.argmax);
      bc->pre_pool_shape = gated.shape();
    }
    x = std::move(pooled.output);
  }
  Tensor flat = x.reshape({config_.flatten_dim()});
  Tensor embedding = activation(dense(flat, encoder_.head_weight.value, encoder_.head_bias.value),
                                Activation::kTanh);
  if (cache) {
    cache->flat = std::move(flat);
    cache->embedding = embedding;
  }
  return embedding;
}

Tensor DayAutoencoder::encode_backward(EncoderCache& cache, const Tensor& grad_embedding,
                                       bool want_input) {
  const Tensor grad_pre =
      activation_backward({}, cache.embedding, grad_embedding, Activation::kTanh);
  DenseGrad head = dense_backward(cache.flat, encoder_.head_weight.value, grad_pre);
  accumulate(encoder_.head_weight, head.weight);
  accumulate(encoder_.head_bias, head.bias);

  Tensor grad = std::move(head.input);
  for (std::size_t b = encoder_.blocks.size(); b-- > 0;) {
    auto& block = encoder_.blocks[b];
    const auto& bc = cache.blocks[b];
    grad = maxpool1d_backward(grad, bc.argmax, bc.pre_pool_shape);
    const Tensor grad_conv = activate_and_gate_backward(block, bc, std::move(grad));
    ConvGrad cg = conv1d_backward(bc.input, block.kernels.value, grad_conv, 1, b > 0 || want_input);
    accumulate(block.kernels, cg.kernels);
    accumulate(block.bias, cg.bias);
    grad = std::move(cg.input);
  }
  return grad;
}

Tensor DayAutoencoder::decode(const Tensor& embedding, DecoderCache* cache) const {
  if (embedding.size() != config_.embedding_dim) {
    throw ShapeError("decode: expected embedding of " + std::to_string(config_.embedding_dim) +
                     ", got " + shape_to_string(embedding.shape()));
  }
  const Tensor emb = embedding.reshaped({config_.embedding_dim});
  Tensor uncompressed =
      activation(dense(emb, decoder_.uncompress_weight.value, decoder_.uncompress_bias.value),
                 Activation::kTanh);
  if (cache) {
    cache->embedding = emb;
    cache->uncompressed = uncompressed;
    cache->blocks.assign(decoder_.blocks.size(), {});
  }
  Tensor x = uncompressed.reshaped({config_.bottleneck_steps(), config_.channels.back()});
  for (std::size_t i = 0; i < decoder_.blocks.size(); ++i) {
    const auto& block = decoder_.blocks[i];
    ConvBlockCache* bc = cache ? &cache->blocks[i] : nullptr;
    Tensor next =
        activate_and_gate(block, transposed_conv1d(x, block.kernels.value, block.bias.value), bc);
    if (bc) bc->input = std::move(x);
    x = std::move(next);
  }
  return x.reshape({config_.input_steps});
}

Tensor DayAutoencoder::decode_backward(DecoderCache& cache, const Tensor& grad_reconstruction) {
  Tensor grad = grad_reconstruction.reshaped({config_.input_steps, 1});
  for (std::size_t i = decoder_.blocks.size(); i-- > 0;) {
    auto& block = decoder_.blocks[i];
    const auto& bc = cache.blocks[i];
    const Tensor grad_conv = activate_and_gate_backward(block, bc, std::move(grad));
    ConvGrad cg = transposed_conv1d_backward(bc.input, block.kernels.value, grad_conv);
    accumulate(block.kernels, cg.kernels);
    accumulate(block.bias, cg.bias);
    grad = std::move(cg.input);
  }
  grad.reshape({config_.flatten_dim()});
  const Tensor grad_pre = activation_backward({}, cache.uncompressed, grad, Activation::kTanh);
  DenseGrad dg = dense_backward(cache.embedding, decoder_.uncompress_weight.value, grad_pre);
  accumulate(decoder_.uncompress_weight, dg.weight);
  accumulate(decoder_.uncompress_bias, dg.bias);
  return std::move(dg.input);
}

Tensor prepare_input(const DayLongSeries& series, const ArchConfig& config) {
  if (series.values.size() != config.input_steps) {
    throw ShapeError("day has " + std::to_string(series.values.size()) + " slots, model expects " +
                     std::to_string(config.input_steps));
  }
  Tensor input({config.input_steps, 1});
  for (std::size_t k = 0; k < config.input_steps; ++k) {
    input[k] = series.mask[k] ? series.values[k] * config.input_scale : 0.0;
  }
  return input;
}

DayEmbedding encode_day(const DayLongSeries& series, const DayAutoencoder& model) {
  const Tensor emb = model.encode(prepare_input(series, model.config()));
  return DayEmbedding{emb.storage(), series.user_id, series.date};
}

Tensor decode_day(const DayEmbedding& embedding, const DayAutoencoder& model) {
  return model.decode(Tensor::from(embedding.vector));
}

double masked_reconstruction_loss(std::span<const double> target,
                                  std::span<const std::uint8_t> mask,
                                  std::span<const double> reconstruction) {
  if (target.size() != mask.size() || target.size() != reconstruction.size()) {
    throw ShapeError("masked_reconstruction_loss: length mismatch");
  }
  double loss = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (!mask[k]) continue;
    const double diff = reconstruction[k] - target[k];
    loss += diff * diff;
  }
  return loss;
}

Tensor masked_reconstruction_grad(std::span<const double> target,
                                  std::span<const std::uint8_t> mask,
                                  std::span<const double> reconstruction) {
  if (target.size() != mask.size() || target.size() != reconstruction.size()) {
    throw ShapeError("masked_reconstruction_grad: length mismatch");
  }
  Tensor grad({target.size()});
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (mask[k]) grad[k] = 2.0 * (reconstruction[k] - target[k]);
  }
  return grad;
}

double mean_observed_level(const std::vector<UserArchive>& archives,
                           std::span<const std::size_t> users, double scale) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t u : users) {
    for (const auto& day : archives.at(u).days) {
      for (std::size_t k = 0; k < day.values.size(); ++k) {
        if (day.mask[k]) {
          sum += day.values[k] * scale;
          ++count;
        }
      }
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double masked_reconstruction_loss(const DayLongSeries& series, const Tensor& reconstruction,
                                  double scale) {
  std::vector<double> target(series.values.size());
  for (std::size_t k = 0; k < target.size(); ++k) target[k] = series.values[k] * scale;
  return masked_reconstruction_loss(target, series.mask, reconstruction.values());
}

}  // namespace wearembed
