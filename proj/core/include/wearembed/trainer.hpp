// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Batched optimisation of the joint objective with Adam, per-epoch
// validation on held-out users and early stopping.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "wearembed/adam.hpp"
#include "wearembed/datapipe.hpp"
#include "wearembed/model.hpp"
#include "wearembed/rng.hpp"
#include "wearembed/siamese.hpp"

namespace wearembed {

struct TrainConfig {
  std::size_t embedding_dim = 64;
  std::size_t support_size = 6;
  std::size_t positive_size = 2;
  std::size_t negative_size = 4;
  double margin = 1.0;
  double lambda = 0.1;
  double learning_rate = 5e-4;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  /// Stop after this many optimizer steps; 0 means no limit.
  std::size_t max_steps = 0;
  /// Share of users held out for validation (at least one when >= 3 users).
  double valid_fraction = 0.1;

  TripletSizes triplet_sizes() const { return {support_size, positive_size, negative_size}; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Throws std::invalid_argument when a field is out of range.
void validate(const TrainConfig& config);

/// `arch` with its embedding width replaced by config.embedding_dim and a
/// matching aggregator.
ModelConfig model_config_for(const TrainConfig& config, ArchConfig arch = {});

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double l_ae = 0.0;      // means over the epoch's steps
  double l_s = 0.0;
  double l_joint = 0.0;
  double val_joint = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainerState {
  TrainerState(TrainConfig config, ModelConfig model_config);

  TrainConfig config;
  Model model;
  AdamState adam;
  Rng rng;
  std::size_t epoch = 0;  // completed epochs
  std::size_t step = 0;   // completed optimizer steps
  std::vector<LossBreakdown> steps;
  std::vector<EpochRecord> history;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t stale_epochs = 0;
  std::vector<Tensor> best_values;  // parameters at best_epoch
  std::size_t sampler_warnings = 0;
  bool early_stopped = false;
};

/// Fresh state: model initialised from config.seed, Adam moments at zero.
TrainerState initial_state(const TrainConfig& config, const ModelConfig& model_config);

/// Copy of the model carrying the best-validation parameters when known.
Model best_model(const TrainerState& state);

struct UserPartition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;  // may be empty
};

/// Throws std::invalid_argument for fewer than 2 users.
UserPartition partition_users(std::size_t n_users, double valid_fraction, std::uint64_t seed);

/// Extra supervised term on an anchor's aggregated reference embedding.
/// Returns the anchor's loss and writes d loss / d reference into `grad`.
using ReferenceHook = std::function<double(std::size_t anchor, std::span<const double> reference,
                                           std::span<double> grad)>;

/// Forward and backward for one sampled batch. Gradients are accumulated
/// into the model parameters; nothing is updated.
///   l_ae      = mean over the distinct days touched by the batch
///   l_s       = mean over anchors
///   head_loss = mean of `hook` over anchors, weighted by hook_weight
LossBreakdown accumulate_gradients(Model& model, const std::vector<UserArchive>& archives,
                                   const TripletSample& sample, const TrainConfig& config,
                                   const ReferenceHook& hook = {}, double hook_weight = 0.0);

/// Forward-only version of the same objective.
LossBreakdown evaluate_loss(const Model& model, const std::vector<UserArchive>& archives,
                            const TripletSample& sample, const TrainConfig& config);

/// Sample, accumulate gradients and apply one Adam update. Throws
/// DivergenceError on a non-finite loss, leaving parameters untouched.
LossBreakdown train_step(Model& model, AdamState& adam, const std::vector<UserArchive>& archives,
                         std::span<const std::size_t> anchors,
                         std::span<const std::size_t> negative_pool, const TrainConfig& config,
                         Rng& rng, std::size_t* warnings = nullptr);

struct FitOptions {
  ArchConfig arch;
  /// Written before the first epoch and after every completed epoch.
  std::optional<std::filesystem::path> checkpoint_path;
  /// Continue from a saved state. Its max_epochs and max_steps are replaced
  /// by those of the config passed to fit; everything else must match.
  std::optional<TrainerState> resume;
  std::function<void(const TrainerState&)> on_epoch;
};

/// Runs epochs until max_epochs, max_steps or early stopping. Returns the
/// final state; use best_model() for the early-stopping selection.
TrainerState fit(const std::vector<UserArchive>& archives, const TrainConfig& config,
                 FitOptions options = {});

}  // namespace wearembed
