// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Semi-supervised fine-tuning: a single dense head on the aggregated user
// embedding, trained with the joint objective or alone on frozen features.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wearembed/evalsuite.hpp"
#include "wearembed/model.hpp"
#include "wearembed/siamese.hpp"
#include "wearembed/trainer.hpp"

namespace wearembed {

enum class HeadKind { kCategorical, kNumeric };

class SupervisedHead {
 public:
  /// Categorical heads emit `classes` logits; numeric heads one value.
  SupervisedHead(HeadKind kind, std::size_t dim, std::size_t classes);

  void initialize(Rng& rng);
  HeadKind kind() const { return kind_; }
  std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }

  /// Numeric targets are learned as (target - mean) / scale.
  void set_target_normalization(double mean, double scale);

  /// Cross-entropy of `label` or squared error against `target`. Adds the
  /// parameter gradients and, when `grad_features` is non-empty, writes
  /// d loss / d features there. The const overload only evaluates.
  double loss(std::span<const double> features, std::size_t label, double target,
              std::span<double> grad_features);
  double loss(std::span<const double> features, std::size_t label, double target) const;

  /// Class probabilities, or the single prediction in target units.
  std::vector<double> predict(std::span<const double> features) const;

 private:
  std::vector<double> logits(std::span<const double> features) const;
  double output_loss(std::span<const double> features, std::size_t label, double target,
                     std::vector<double>& grad_z) const;

  HeadKind kind_;
  Parameter weight_;  // [outputs x dim]
  Parameter bias_;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;
};

/// Full-batch gradient descent on the head alone. Returns the mean loss
/// before each step and after the last.
std::vector<double> train_head_frozen(SupervisedHead& head,
                                      std::span<const std::vector<double>> features,
                                      std::span<const std::size_t> labels,
                                      std::span<const double> targets, double learning_rate,
                                      std::size_t iterations);

struct FinetuneResult {
  Model model;
  SupervisedHead head;
  std::vector<LossBreakdown> steps;  // joint mode
  std::vector<double> head_history;  // frozen mode
  MetricReport report;               // on the test users of a 60/10/30 split
};

/// Categorical attributes use the cross-entropy branch, numeric ones the
/// squared-error branch. Throws AttributeError for an unknown attribute.
FinetuneResult semi_supervised_finetune(const Model& model,
                                        const std::vector<UserArchive>& archives,
                                        const std::string& attribute,
                                        const TrainConfig& train_config,
                                        const EvalConfig& eval_config);

}  // namespace wearembed
