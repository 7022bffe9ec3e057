// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Temporal pattern aggregation: a set of dated day embeddings -> one vector.
//
//   h_t   = g_t + timing_signal(offset_t)
//   H     = attention_block_2(attention_block_1(h))
//   alpha = softmax_t(c . tanh(Wa H_t + ba))
//   out   = sum_t alpha_t g_t
//
// Each attention block is multi-head self-attention (softmax over keys),
// a cross-head mixing matrix, and a position-wise relu feed-forward layer.
// There are no residual connections or normalisation layers.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wearembed/datapipe.hpp"
#include "wearembed/rng.hpp"
#include "wearembed/tensor.hpp"

namespace wearembed {

struct AggregatorConfig {
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t ff_multiplier = 4;
  std::size_t attention_blocks = 2;

  std::size_t head_dim() const { return dim / heads; }
  std::size_t ff_dim() const { return ff_multiplier * dim; }

  friend bool operator==(const AggregatorConfig&, const AggregatorConfig&) = default;
};

void validate(const AggregatorConfig& config);

/// offset[t] = max(dates) - dates[t] in whole days.
std::vector<std::int64_t> relative_day_offsets(std::span<const Date> dates);

/// e[2i] = sin(t / 10000^(2i/dim)), e[2i+1] = cos(t / 10000^(2i/dim)).
std::vector<double> timing_signal_embedding(std::int64_t t, std::size_t dim);

struct AttentionHeadParams {
  Parameter query;  // [head_dim x dim]
  Parameter key;
  Parameter value;
};

struct AttentionBlockParams {
  AttentionBlockParams() = default;
  AttentionBlockParams(const std::string& prefix, const AggregatorConfig& config);
  void initialize(Rng& rng);
  void collect(std::vector<Parameter*>& out);

  std::vector<AttentionHeadParams> heads;
  Parameter mix;         // [dim x dim]
  Parameter ff_weight1;  // [ff_dim x dim]
  Parameter ff_bias1;
  Parameter ff_weight2;  // [dim x ff_dim]
  Parameter ff_bias2;
};

struct TemporalAttentionParams {
  TemporalAttentionParams() = default;
  TemporalAttentionParams(const std::string& prefix, std::size_t dim);
  void initialize(Rng& rng);
  void collect(std::vector<Parameter*>& out);

  Parameter weight;   // [dim x dim]
  Parameter bias;     // [dim]
  Parameter context;  // [dim]
};

struct AttentionHeadCache {
  Tensor queries;  // [T x head_dim]
  Tensor keys;
  Tensor values;
  Tensor weights;  // softmax output [T x T]
};

struct AttentionBlockCache {
  Tensor input;
  std::vector<AttentionHeadCache> heads;
  Tensor concat;
  Tensor mixed;
  Tensor ff_pre;
  Tensor ff_hidden;
};

Tensor multi_head_attention_block(const Tensor& h, const AttentionBlockParams& params,
                                  AttentionBlockCache* cache = nullptr);
/// Accumulates parameter gradients; returns the input gradient.
Tensor multi_head_attention_backward(AttentionBlockParams& params, const AttentionBlockCache& cache,
                                     const Tensor& grad_out);

struct AggregatedEmbedding {
  std::vector<double> vector;
  std::vector<double> attention_weights;
};

struct TemporalPoolCache {
  Tensor transformed;  // [T x dim], the attention-block output
  Tensor embeddings;   // [T x dim], raw day embeddings
  Tensor activated;    // tanh(W H + b)
  Tensor weights;      // alpha [T]
};

AggregatedEmbedding temporal_attention_pool(const Tensor& transformed, const Tensor& embeddings,
                                            const TemporalAttentionParams& params,
                                            TemporalPoolCache* cache = nullptr);

struct TemporalPoolGrad {
  Tensor transformed;
  Tensor embeddings;
};

TemporalPoolGrad temporal_attention_pool_backward(TemporalAttentionParams& params,
                                                  const TemporalPoolCache& cache,
                                                  std::span<const double> grad_out);

struct AggregatorCache {
  std::vector<AttentionBlockCache> blocks;
  TemporalPoolCache pool;
};

class Aggregator {
 public:
  explicit Aggregator(AggregatorConfig config = {});

  void initialize(Rng& rng);
  const AggregatorConfig& config() const { return config_; }
  std::vector<Parameter*> parameters();

  std::vector<AttentionBlockParams>& blocks() { return blocks_; }
  TemporalAttentionParams& pool() { return pool_; }
  const TemporalAttentionParams& pool() const { return pool_; }

  /// embeddings [T x dim], one offset per row. Throws on T == 0.
  AggregatedEmbedding forward(const Tensor& embeddings, std::span<const std::int64_t> offsets,
                              AggregatorCache* cache = nullptr) const;
  /// Accumulates parameter gradients; returns d out / d embeddings [T x dim].
  Tensor backward(AggregatorCache& cache, std::span<const double> grad_out);

 private:
  AggregatorConfig config_;
  std::vector<AttentionBlockParams> blocks_;
  TemporalAttentionParams pool_;
};

/// The aggregation function applied to a set of (embedding, date) pairs.
AggregatedEmbedding aggregate_embeddings(std::span<const std::vector<double>> embeddings,
                                         std::span<const Date> dates, const Aggregator& aggregator);

}  // namespace wearembed
