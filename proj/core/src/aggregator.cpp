// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wearembed/errors.hpp"
#include "wearembed/kernels.hpp"

namespace wearembed {
namespace {

// Columns [offset, offset + width) of a rank-2 tensor.
Tensor slice_columns(const Tensor& m, std::size_t offset, std::size_t width) {
  Tensor out({m.dim(0), width});
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    std::copy_n(m.row(r) + offset, width, out.row(r));
  }
  return out;
}

void write_columns(Tensor& m, std::size_t offset, const Tensor& part) {
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    std::copy_n(part.row(r), part.dim(1), m.row(r) + offset);
  }
}

}  // namespace

void validate(const AggregatorConfig& c) {
  if (c.dim == 0 || c.heads == 0 || c.dim % c.heads != 0) {
    throw std::invalid_argument("aggregator dim must be a positive multiple of the head count");
  }
  if (c.dim % 2 != 0) throw std::invalid_argument("aggregator dim must be even");
  if (c.ff_multiplier == 0) throw std::invalid_argument("ff_multiplier must be positive");
}

std::vector<std::int64_t> relative_day_offsets(std::span<const Date> dates) {
  if (dates.empty()) throw std::invalid_argument("relative_day_offsets: no dates");
  const Date last = *std::max_element(dates.begin(), dates.end());
  std::vector<std::int64_t> offsets;
  offsets.reserve(dates.size());
  for (Date d : dates) offsets.push_back((last - d).count());
  return offsets;
}

std::vector<double> timing_signal_embedding(std::int64_t t, std::size_t dim) {
  if (dim % 2 != 0) throw std::invalid_argument("timing signal needs an even dimension");
  std::vector<double> e(dim);
  for (std::size_t i = 0; 2 * i < dim; ++i) {
    const double rate = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
    const double angle = static_cast<double>(t) / rate;
    e[2 * i] = std::sin(angle);
    e[2 * i + 1] = std::cos(angle);
  }
  return e;
}

AttentionBlockParams::AttentionBlockParams(const std::string& prefix,
                                           const AggregatorConfig& config)
    : mix(prefix + ".mix", {config.dim, config.dim}),
      ff_weight1(prefix + ".ff1.weight", {config.ff_dim(), config.dim}),
      ff_bias1(prefix + ".ff1.bias", {config.ff_dim()}),
      ff_weight2(prefix + ".ff2.weight", {config.dim, config.ff_dim()}),
      ff_bias2(prefix + ".ff2.bias", {config.dim}) {
  for (std::size_t q = 0; q < config.heads; ++q) {
    const std::string name = prefix + ".head" + std::to_string(q);
    heads.push_back({Parameter(name + ".query", {config.head_dim(), config.dim}),
                     Parameter(name + ".key", {config.head_dim(), config.dim}),
                     Parameter(name + ".value", {config.head_dim(), config.dim})});
  }
}

void AttentionBlockParams::initialize(Rng& rng) {
  for (auto& head : heads) {
    for (Parameter* p : {&head.query, &head.key, &head.value}) {
      glorot_uniform(p->value, p->value.dim(1), p->value.dim(0), rng);
    }
  }
  glorot_uniform(mix.value, mix.value.dim(1), mix.value.dim(0), rng);
  glorot_uniform(ff_weight1.value, ff_weight1.value.dim(1), ff_weight1.value.dim(0), rng);
  glorot_uniform(ff_weight2.value, ff_weight2.value.dim(1), ff_weight2.value.dim(0), rng);
  ff_bias1.value.fill(0.0);
  ff_bias2.value.fill(0.0);
}

void AttentionBlockParams::collect(std::vector<Parameter*>& out) {
  for (auto& head : heads) {
    out.push_back(&head.query);
    out.push_back(&head.key);
    out.push_back(&head.value);
  }
  for (Parameter* p : {&mix, &ff_weight1, &ff_bias1, &ff_weight2, &ff_bias2}) out.push_back(p);
}

TemporalAttentionParams::TemporalAttentionParams(const std::string& prefix, std::size_t dim)
    : weight(prefix + ".weight", {dim, dim}),
      bias(prefix + ".bias", {dim}),
      context(prefix + ".context", {dim}) {}

void TemporalAttentionParams::initialize(Rng& rng) {
  glorot_uniform(weight.value, weight.value.dim(1), weight.value.dim(0), rng);
  bias.value.fill(0.0);
  glorot_uniform(context.value, context.value.size(), 1, rng);
}

void TemporalAttentionParams::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
  out.push_back(&context);
}

Tensor multi_head_attention_block(const Tensor& h, const AttentionBlockParams& params,
                                  AttentionBlockCache* cache) {
  if (h.rank() != 2 || h.dim(0) == 0 || h.dim(1) != params.mix.value.dim(0)) {
    throw ShapeError("attention block: input " + shape_to_string(h.shape()) + " vs model width " +
                     std::to_string(params.mix.value.dim(0)));
  }
  const std::size_t steps = h.dim(0);
  const std::size_t head_dim = params.heads.front().query.value.dim(0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Tensor concat({steps, h.dim(1)});
  if (cache) cache->heads.assign(params.heads.size(), {});
  for (std::size_t q = 0; q < params.heads.size(); ++q) {
    const auto& head = params.heads[q];
    Tensor queries = dense(h, head.query.value, {});
    Tensor keys = dense(h, head.key.value, {});
    Tensor values = dense(h, head.value.value, {});
    Tensor scores = matmul(queries, keys, false, true);
    scores *= scale;
    Tensor weights = softmax_axis(scores, 1);
    write_columns(concat, q * head_dim, matmul(weights, values));
    if (cache) {
      cache->heads[q] = {std::move(queries), std::move(keys), std::move(values),
                         std::move(weights)};
    }
  }
  Tensor mixed = dense(concat, params.mix.value, {});
  Tensor ff_pre = dense(mixed, params.ff_weight1.value, params.ff_bias1.value);
  Tensor ff_hidden = activation(ff_pre, Activation::kRelu);
  Tensor out = dense(ff_hidden, params.ff_weight2.value, params.ff_bias2.value);
  if (cache) {
    cache->input = h;
    cache->concat = std::move(concat);
    cache->mixed = std::move(mixed);
    cache->ff_pre = std::move(ff_pre);
    cache->ff_hidden = std::move(ff_hidden);
  }
  return out;
}

Tensor multi_head_attention_backward(AttentionBlockParams& params, const AttentionBlockCache& cache,
                                     const Tensor& grad_out) {
  DenseGrad ff2 = dense_backward(cache.ff_hidden, params.ff_weight2.value, grad_out);
  accumulate(params.ff_weight2, ff2.weight);
  accumulate(params.ff_bias2, ff2.bias);
  const Tensor grad_ff_pre =
      activation_backward(cache.ff_pre, cache.ff_hidden, ff2.input, Activation::kRelu);
  DenseGrad ff1 = dense_backward(cache.mixed, params.ff_weight1.value, grad_ff_pre);
  accumulate(params.ff_weight1, ff1.weight);
  accumulate(params.ff_bias1, ff1.bias);
  DenseGrad mix = dense_backward(cache.concat, params.mix.value, ff1.input);
  accumulate(params.mix, mix.weight);

  const std::size_t head_dim = params.heads.front().query.value.dim(0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Tensor grad_in(cache.input.shape());
  for (std::size_t q = 0; q < params.heads.size(); ++q) {
    auto& head = params.heads[q];
    const auto& hc = cache.heads[q];
    const Tensor grad_head = slice_columns(mix.input, q * head_dim, head_dim);
    const Tensor grad_weights = matmul(grad_head, hc.values, false, true);
    const Tensor grad_values = matmul(hc.weights, grad_head, true, false);
    Tensor grad_scores = softmax_backward(hc.weights, grad_weights, 1);
    grad_scores *= scale;
    const Tensor grad_queries = matmul(grad_scores, hc.keys);
    const Tensor grad_keys = matmul(grad_scores, hc.queries, true, false);

    DenseGrad dq = dense_backward(cache.input, head.query.value, grad_queries);
    DenseGrad dk = dense_backward(cache.input, head.key.value, grad_keys);
    DenseGrad dv = dense_backward(cache.input, head.value.value, grad_values);
    accumulate(head.query, dq.weight);
    accumulate(head.key, dk.weight);
    accumulate(head.value, dv.weight);
    grad_in += dq.input;
    grad_in += dk.input;
    grad_in += dv.input;
  }
  return grad_in;
}

AggregatedEmbedding temporal_attention_pool(const Tensor& transformed, const Tensor& embeddings,
                                            const TemporalAttentionParams& params,
                                            TemporalPoolCache* cache) {
  require_same_shape(transformed, embeddings, "temporal_attention_pool");
  if (transformed.rank() != 2 || transformed.dim(0) == 0) {
    throw ShapeError("temporal_attention_pool: expected non-empty [T x dim]");
  }
  const std::size_t steps = transformed.dim(0);
  const std::size_t dim = embeddings.dim(1);
  Tensor activated =
      activation(dense(transformed, params.weight.value, params.bias.value), Activation::kTanh);
  Tensor scores({steps});
  for (std::size_t t = 0; t < steps; ++t) {
    double s = 0.0;
    const double* row = activated.row(t);
    for (std::size_t j = 0; j < activated.dim(1); ++j) s += params.context.value[j] * row[j];
    scores[t] = s;
  }
  Tensor weights = softmax_axis(scores, 0);

  AggregatedEmbedding out{std::vector<double>(dim, 0.0), weights.storage()};
  for (std::size_t t = 0; t < steps; ++t) {
    const double* g = embeddings.row(t);
    for (std::size_t j = 0; j < dim; ++j) out.vector[j] += weights[t] * g[j];
  }
  if (cache) {
    cache->transformed = transformed;
    cache->embeddings = embeddings;
    cache->activated = std::move(activated);
    cache->weights = std::move(weights);
  }
  return out;
}

TemporalPoolGrad temporal_attention_pool_backward(TemporalAttentionParams& params,
                                                  const TemporalPoolCache& cache,
                                                  std::span<const double> grad_out) {
  const std::size_t steps = cache.embeddings.dim(0);
  const std::size_t dim = cache.embeddings.dim(1);
  if (grad_out.size() != dim) throw ShapeError("temporal pool backward: gradient length");

  TemporalPoolGrad grad{Tensor(cache.transformed.shape()), Tensor(cache.embeddings.shape())};
  Tensor grad_weights({steps});
  for (std::size_t t = 0; t < steps; ++t) {
    const double* g = cache.embeddings.row(t);
    double* dg = grad.embeddings.row(t);
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      acc += g[j] * grad_out[j];
      dg[j] = cache.weights[t] * grad_out[j];
    }
    grad_weights[t] = acc;
  }
  const Tensor grad_scores = softmax_backward(cache.weights, grad_weights, 0);

  const std::size_t width = cache.activated.dim(1);
  Tensor grad_activated({steps, width});
  Tensor grad_context({width});
  for (std::size_t t = 0; t < steps; ++t) {
    const double* a = cache.activated.row(t);
    double* da = grad_activated.row(t);
    for (std::size_t j = 0; j < width; ++j) {
      grad_context[j] += grad_scores[t] * a[j];
      da[j] = grad_scores[t] * params.context.value[j];
    }
  }
  accumulate(params.context, grad_context);
  const Tensor grad_pre =
      activation_backward({}, cache.activated, grad_activated, Activation::kTanh);
  DenseGrad dw = dense_backward(cache.transformed, params.weight.value, grad_pre);
  accumulate(params.weight, dw.weight);
  accumulate(params.bias, dw.bias);
  grad.transformed = std::move(dw.input);
  return grad;
}

Aggregator::Aggregator(AggregatorConfig config)
    : config_(config), pool_("aggregator.pool", config.dim) {
  validate(config_);
  for (std::size_t b = 0; b < config_.attention_blocks; ++b) {
    blocks_.emplace_back("aggregator.block" + std::to_string(b), config_);
  }
}

void Aggregator::initialize(Rng& rng) {
  for (auto& block : blocks_) block.initialize(rng);
  pool_.initialize(rng);
}

std::vector<Parameter*> Aggregator::parameters() {
  std::vector<Parameter*> out;
  for (auto& block : blocks_) block.collect(out);
  pool_.collect(out);
  return out;
}

AggregatedEmbedding Aggregator::forward(const Tensor& embeddings,
                                        std::span<const std::int64_t> offsets,
                                        AggregatorCache* cache) const {
  if (embeddings.rank() != 2 || embeddings.dim(0) == 0) {
    throw std::invalid_argument("aggregate: at least one day embedding is required");
  }
  if (embeddings.dim(1) != config_.dim || offsets.size() != embeddings.dim(0)) {
    throw ShapeError("aggregate: embeddings " + shape_to_string(embeddings.shape()) + " with " +
                     std::to_string(offsets.size()) + " offsets, model width " +
                     std::to_string(config_.dim));
  }
  Tensor h = embeddings;
  for (std::size_t t = 0; t < h.dim(0); ++t) {
    const auto signal = timing_signal_embedding(offsets[t], config_.dim);
    double* row = h.row(t);
    for (std::size_t j = 0; j < config_.dim; ++j) row[j] += signal[j];
  }
  if (cache) cache->blocks.assign(blocks_.size(), {});
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    h = multi_head_attention_block(h, blocks_[b], cache ? &cache->blocks[b] : nullptr);
  }
  return temporal_attention_pool(h, embeddings, pool_, cache ? &cache->pool : nullptr);
}

Tensor Aggregator::backward(AggregatorCache& cache, std::span<const double> grad_out) {
  TemporalPoolGrad pg = temporal_attention_pool_backward(pool_, cache.pool, grad_out);
  Tensor grad = std::move(pg.transformed);
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    grad = multi_head_attention_backward(blocks_[b], cache.blocks[b], grad);
  }
  // The timing signal is constant, so d h0 / d g is the identity.
  grad += pg.embeddings;
  return grad;
}

AggregatedEmbedding aggregate_embeddings(std::span<const std::vector<double>> embeddings,
                                         std::span<const Date> dates,
                                         const Aggregator& aggregator) {
  if (embeddings.empty()) {
    throw std::invalid_argument("aggregate_embeddings: at least one day embedding is required");
  }
  if (embeddings.size() != dates.size()) {
    throw std::invalid_argument("aggregate_embeddings: one date per embedding is required");
  }
  const std::size_t dim = aggregator.config().dim;
  Tensor stacked({embeddings.size(), dim});
  for (std::size_t t = 0; t < embeddings.size(); ++t) {
    if (embeddings[t].size() != dim) throw ShapeError("aggregate_embeddings: embedding width");
    std::copy(embeddings[t].begin(), embeddings[t].end(), stacked.row(t));
  }
  const auto offsets = relative_day_offsets(dates);
  return aggregator.forward(stacked, offsets);
}

}  // namespace wearembed
