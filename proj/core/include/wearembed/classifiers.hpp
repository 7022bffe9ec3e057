// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Downstream probes fitted on frozen embeddings.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wearembed/tensor.hpp"

namespace wearembed {

struct LabeledEmbedding {
  std::vector<double> features;
  std::size_t label = 0;  // class index for classification
  double target = 0.0;    // value for regression
  std::string group;      // user id
};

struct LogisticOptions {
  double l2 = 1e-4;
  std::size_t iterations = 500;
  double learning_rate = 0.5;
  /// Features are centred and scaled with training statistics.
  bool standardize = true;
};

class LogisticClassifier {
 public:
  std::size_t classes() const { return weights_.dim(0); }
  std::vector<double> predict_proba(std::span<const double> features) const;
  std::size_t predict(std::span<const double> features) const;
  /// Training objective (mean cross-entropy + L2) before each iteration and
  /// after the last one.
  const std::vector<double>& loss_history() const { return loss_history_; }

  friend LogisticClassifier fit_logistic(std::span<const LabeledEmbedding> train,
                                         const LogisticOptions& options);

 private:
  std::vector<double> standardized(std::span<const double> features) const;

  std::vector<double> mean_;
  std::vector<double> scale_;  // 1/std, or 0 for constant features
  Tensor weights_;             // [classes x dim]
  std::vector<double> bias_;
  std::vector<double> loss_history_;
};

/// Multinomial logistic regression by full-batch gradient descent with an
/// L2 penalty on the weights. The class count is max(label) + 1. Throws
/// std::invalid_argument when fewer than two classes occur.
LogisticClassifier fit_logistic(std::span<const LabeledEmbedding> train,
                                const LogisticOptions& options = {});

struct LinearRegressor {
  std::vector<double> coefficients;
  double intercept = 0.0;

  double predict(std::span<const double> features) const;
};

/// Least squares with intercept through the normal equations. `ridge` is
/// added to the diagonal before factoring and a few refinement sweeps
/// against the plain system follow. Throws std::invalid_argument for fewer
/// than 2 samples.
LinearRegressor fit_linear(std::span<const LabeledEmbedding> train, double ridge = 1e-8);

}  // namespace wearembed
