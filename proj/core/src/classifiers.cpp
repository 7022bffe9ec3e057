// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/classifiers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "wearembed/errors.hpp"

namespace wearembed {
namespace {

std::size_t feature_dim(std::span<const LabeledEmbedding> samples) {
  const std::size_t dim = samples.front().features.size();
  for (const auto& s : samples) {
    if (s.features.size() != dim) throw ShapeError("inconsistent feature dimension");
  }
  return dim;
}

void softmax_inplace(std::vector<double>& z) {
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : z) v /= total;
}

}  // namespace

std::vector<double> LogisticClassifier::standardized(std::span<const double> features) const {
  if (features.size() != mean_.size()) throw ShapeError("logistic: feature dimension mismatch");
  std::vector<double> x(features.size());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (features[j] - mean_[j]) * scale_[j];
  return x;
}

std::vector<double> LogisticClassifier::predict_proba(std::span<const double> features) const {
  const auto x = standardized(features);
  std::vector<double> z(bias_);
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double* w = weights_.row(c);
    for (std::size_t j = 0; j < x.size(); ++j) z[c] += w[j] * x[j];
  }
  softmax_inplace(z);
  return z;
}

std::size_t LogisticClassifier::predict(std::span<const double> features) const {
  const auto p = predict_proba(features);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

LogisticClassifier fit_logistic(std::span<const LabeledEmbedding> train,
                                const LogisticOptions& options) {
  if (train.empty()) throw std::invalid_argument("fit_logistic: empty training set");
  std::set<std::size_t> present;
  for (const auto& s : train) present.insert(s.label);
  if (present.size() < 2) {
    throw std::invalid_argument("fit_logistic: training data holds a single class");
  }
  const std::size_t dim = feature_dim(train);
  const std::size_t n_classes = *present.rbegin() + 1;
  const std::size_t n = train.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  LogisticClassifier model;
  model.mean_.assign(dim, 0.0);
  model.scale_.assign(dim, 1.0);
  if (options.standardize) {
    for (const auto& s : train) {
      for (std::size_t j = 0; j < dim; ++j) model.mean_[j] += s.features[j] * inv_n;
    }
    for (std::size_t j = 0; j < dim; ++j) {
      double var = 0.0;
      for (const auto& s : train) {
        const double d = s.features[j] - model.mean_[j];
        var += d * d * inv_n;
      }
      model.scale_[j] = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
    }
  }
  Eigen::MatrixXd x(n, dim);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, n_classes);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = model.standardized(train[i].features);
    for (std::size_t j = 0; j < dim; ++j) x(i, j) = row[j];
    y(i, train[i].label) = 1.0;
  }

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_classes, dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_classes);
  auto objective = [&](const Eigen::MatrixXd& probs) {
    double ce = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ce -= std::log(std::max(probs(i, train[i].label), 1e-300));
    }
    return ce * inv_n + 0.5 * options.l2 * w.squaredNorm();
  };
  auto probabilities = [&] {
    Eigen::MatrixXd z = x * w.transpose();
    z.rowwise() += b.transpose();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double peak = z.row(i).maxCoeff();
      z.row(i) = (z.row(i).array() - peak).exp().matrix();
      z.row(i) /= z.row(i).sum();
    }
    return z;
  };
  for (std::size_t it = 0; it < options.iterations; ++it) {
    const Eigen::MatrixXd probs = probabilities();
    model.loss_history_.push_back(objective(probs));
    const Eigen::MatrixXd residual = (probs - y) * inv_n;
    const Eigen::MatrixXd grad_w = residual.transpose() * x + options.l2 * w;
    const Eigen::VectorXd grad_b = residual.colwise().sum().transpose();
    w -= options.learning_rate * grad_w;
    b -= options.learning_rate * grad_b;
  }
  model.loss_history_.push_back(objective(probabilities()));

  model.weights_ = Tensor({n_classes, dim});
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t j = 0; j < dim; ++j) model.weights_.at(c, j) = w(c, j);
  }
  model.bias_.assign(b.data(), b.data() + n_classes);
  return model;
}

double LinearRegressor::predict(std::span<const double> features) const {
  if (features.size() != coefficients.size()) throw ShapeError("linear: feature dimension");
  double y = intercept;
  for (std::size_t j = 0; j < features.size(); ++j) y += coefficients[j] * features[j];
  return y;
}

LinearRegressor fit_linear(std::span<const LabeledEmbedding> train, double ridge) {
  if (train.size() < 2) throw std::invalid_argument("fit_linear: at least 2 samples required");
  const std::size_t dim = feature_dim(train);
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto cols = static_cast<Eigen::Index>(dim + 1);
  Eigen::MatrixXd design(n, cols);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = train[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < dim; ++j) design(i, static_cast<Eigen::Index>(j)) = s.features[j];
    design(i, cols - 1) = 1.0;
    target(i) = s.target;
  }
  const Eigen::MatrixXd gram = design.transpose() * design;
  Eigen::MatrixXd ridged = gram;
  ridged.diagonal().array() += ridge;
  const Eigen::LDLT<Eigen::MatrixXd> factor(ridged);
  const Eigen::VectorXd rhs = design.transpose() * target;
  // Refinement against the unridged system strips the ridge bias.
  Eigen::VectorXd solution = factor.solve(rhs);
  for (int i = 0; i < 8; ++i) solution += factor.solve(rhs - gram * solution);
  LinearRegressor model;
  model.coefficients.assign(solution.data(), solution.data() + dim);
  model.intercept = solution(cols - 1);
  return model;
}

}  // namespace wearembed
