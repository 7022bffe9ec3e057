// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Day-specific convolutional autoencoder with channel and temporal gating.
//
// Encoder block:  conv1d -> relu -> channel gate -> temporal gate -> maxpool(2)
// Encoder head:   flatten -> dense -> tanh            (the day embedding)
// Decoder:        dense -> tanh -> reshape, then stride-2 transposed conv ->
//                 relu blocks mirroring the encoder; every block but the last
//                 is gated.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wearembed/datapipe.hpp"
#include "wearembed/gating.hpp"
#include "wearembed/rng.hpp"
#include "wearembed/tensor.hpp"

namespace wearembed {

struct ArchConfig {
  std::size_t input_steps = kMinutesPerDay;
  std::vector<std::size_t> kernel_widths{9, 7, 7, 5, 5};
  std::vector<std::size_t> channels{32, 64, 64, 128, 128};
  std::size_t embedding_dim = 64;
  std::size_t gate_reduction = 4;
  /// Raw values are multiplied by this before entering the network; the
  /// reconstruction target is in the same scaled units.
  double input_scale = 0.01;

  std::size_t blocks() const { return kernel_widths.size(); }
  std::size_t bottleneck_steps() const { return input_steps >> blocks(); }
  std::size_t flatten_dim() const { return bottleneck_steps() * channels.back(); }

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

/// Throws std::invalid_argument on inconsistent architecture settings.
void validate(const ArchConfig& config);

struct ConvBlockParams {
  Parameter kernels;
  Parameter bias;
  std::optional<GatingParams> channel_gate;
  std::optional<GatingParams> temporal_gate;
};

struct EncoderParams {
  std::vector<ConvBlockParams> blocks;
  Parameter head_weight;  // [embedding_dim x flatten_dim]
  Parameter head_bias;
};

struct DecoderParams {
  Parameter uncompress_weight;  // [flatten_dim x embedding_dim]
  Parameter uncompress_bias;
  std::vector<ConvBlockParams> blocks;  // transposed-conv kernels [k x out x in]
};

struct ConvBlockCache {
  Tensor input;
  Tensor activated;  // relu output
  GateCache channel;
  GateCache temporal;
  std::vector<std::size_t> argmax;  // encoder only
  Shape pre_pool_shape;
};

struct EncoderCache {
  std::vector<ConvBlockCache> blocks;
  Tensor flat;
  Tensor embedding;
};

struct DecoderCache {
  Tensor embedding;
  Tensor uncompressed;  // tanh output
  std::vector<ConvBlockCache> blocks;
};

class DayAutoencoder {
 public:
  explicit DayAutoencoder(ArchConfig config = {});

  /// Random weights, zero biases. Conv kernels use He-uniform scaled up to
  /// offset the gates; dense layers use Glorot-uniform.
  void initialize(Rng& rng);
  /// Sets the bias of the last decoder layer, so an untrained decoder
  /// already outputs `level` (in scaled units) everywhere.
  void set_output_level(double level);

  const ArchConfig& config() const { return config_; }
  EncoderParams& encoder() { return encoder_; }
  const EncoderParams& encoder() const { return encoder_; }
  DecoderParams& decoder() { return decoder_; }
  const DecoderParams& decoder() const { return decoder_; }

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> encoder_parameters();
  std::vector<Parameter*> decoder_parameters();

  /// [input_steps x 1] -> [embedding_dim]
  Tensor encode(const Tensor& input, EncoderCache* cache = nullptr) const;
  /// Accumulates encoder gradients; returns the input gradient when asked.
  Tensor encode_backward(EncoderCache& cache, const Tensor& grad_embedding,
                         bool want_input = false);

  /// [embedding_dim] -> [input_steps]
  Tensor decode(const Tensor& embedding, DecoderCache* cache = nullptr) const;
  /// Accumulates decoder gradients; returns the embedding gradient.
  Tensor decode_backward(DecoderCache& cache, const Tensor& grad_reconstruction);

 private:
  ArchConfig config_;
  EncoderParams encoder_;
  DecoderParams decoder_;
};

/// Scaled network input [input_steps x 1] for one day.
Tensor prepare_input(const DayLongSeries& series, const ArchConfig& config);

struct DayEmbedding {
  std::vector<double> vector;
  std::string user_id;
  Date date{};
};

DayEmbedding encode_day(const DayLongSeries& series, const DayAutoencoder& model);
/// Reconstruction in scaled units, length input_steps.
Tensor decode_day(const DayEmbedding& embedding, const DayAutoencoder& model);

/// sum_k mask[k] * (reconstruction[k] - target[k])^2
double masked_reconstruction_loss(std::span<const double> target,
                                  std::span<const std::uint8_t> mask,
                                  std::span<const double> reconstruction);
/// d loss / d reconstruction; exactly zero at masked slots.
Tensor masked_reconstruction_grad(std::span<const double> target,
                                  std::span<const std::uint8_t> mask,
                                  std::span<const double> reconstruction);

/// Mean scaled value over every measured slot of the listed users; 0 when
/// there is none.
double mean_observed_level(const std::vector<UserArchive>& archives,
                           std::span<const std::size_t> users, double scale);

/// Loss against a day's values multiplied by `scale`.
double masked_reconstruction_loss(const DayLongSeries& series, const Tensor& reconstruction,
                                  double scale = 1.0);

}  // namespace wearembed
