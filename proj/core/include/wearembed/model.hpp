// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "wearembed/aggregator.hpp"
#include "wearembed/autoencoder.hpp"
#include "wearembed/datapipe.hpp"
#include "wearembed/rng.hpp"

namespace wearembed {

struct ModelConfig {
  ArchConfig arch;
  AggregatorConfig aggregator;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Throws std::invalid_argument when the aggregator width differs from the
/// embedding width or either part is inconsistent.
void validate(const ModelConfig& config);

/// The day autoencoder plus the aggregation network.
class Model {
 public:
  explicit Model(ModelConfig config = {});

  void initialize(Rng& rng);

  const ModelConfig& config() const { return config_; }
  DayAutoencoder& autoencoder() { return autoencoder_; }
  const DayAutoencoder& autoencoder() const { return autoencoder_; }
  Aggregator& aggregator() { return aggregator_; }
  const Aggregator& aggregator() const { return aggregator_; }

  /// Autoencoder parameters followed by aggregator parameters.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

  std::vector<double> embed_day(const DayLongSeries& series) const;
  /// Encodes every day and aggregates them.
  AggregatedEmbedding embed_days(std::span<const DayLongSeries> days) const;

 private:
  ModelConfig config_;
  DayAutoencoder autoencoder_;
  Aggregator aggregator_;
};

}  // namespace wearembed
