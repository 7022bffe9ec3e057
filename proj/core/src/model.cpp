// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/model.hpp"

#include <stdexcept>

#include "wearembed/errors.hpp"

namespace wearembed {

void validate(const ModelConfig& config) {
  validate(config.arch);
  validate(config.aggregator);
  if (config.aggregator.dim != config.arch.embedding_dim) {
    throw std::invalid_argument("aggregator width must equal the embedding width");
  }
}

namespace {
const ModelConfig& checked(const ModelConfig& config) {
  validate(config);
  return config;
}
}  // namespace

Model::Model(ModelConfig config)
    : config_(checked(config)), autoencoder_(config_.arch), aggregator_(config_.aggregator) {}

void Model::initialize(Rng& rng) {
  autoencoder_.initialize(rng);
  aggregator_.initialize(rng);
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out = autoencoder_.parameters();
  for (Parameter* p : aggregator_.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  // The mutable overload only collects addresses.
  const auto params = const_cast<Model*>(this)->parameters();
  return {params.begin(), params.end()};
}

std::vector<Tensor> Model::snapshot() const {
  std::vector<Tensor> values;
  for (const Parameter* p : parameters()) values.push_back(p->value);
  return values;
}

void Model::restore(const std::vector<Tensor>& values) {
  auto params = parameters();
  if (values.size() != params.size()) throw ShapeError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i]->value, values[i], "restore");
    params[i]->value = values[i];
  }
}

std::vector<double> Model::embed_day(const DayLongSeries& series) const {
  return encode_day(series, autoencoder_).vector;
}

AggregatedEmbedding Model::embed_days(std::span<const DayLongSeries> days) const {
  std::vector<std::vector<double>> embeddings;
  std::vector<Date> dates;
  embeddings.reserve(days.size());
  for (const auto& day : days) {
    embeddings.push_back(embed_day(day));
    dates.push_back(day.date);
  }
  return aggregate_embeddings(embeddings, dates, aggregator_);
}

}  // namespace wearembed
