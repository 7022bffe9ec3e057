// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <variant>

#include "wearembed/adam.hpp"
#include "wearembed/errors.hpp"
#include "wearembed/kernels.hpp"

namespace wearembed {
namespace {

constexpr std::uint64_t kHeadInitStream = 21;
constexpr std::uint64_t kFinetuneStream = 22;

}  // namespace

SupervisedHead::SupervisedHead(HeadKind kind, std::size_t dim, std::size_t classes)
    : kind_(kind),
      weight_("head.weight", {kind == HeadKind::kNumeric ? 1 : classes, dim}),
      bias_("head.bias", {kind == HeadKind::kNumeric ? 1 : classes}) {
  if (kind == HeadKind::kCategorical && classes < 2) {
    throw std::invalid_argument("categorical head needs at least 2 classes");
  }
}

void SupervisedHead::initialize(Rng& rng) {
  glorot_uniform(weight_.value, weight_.value.dim(1), weight_.value.dim(0), rng);
  bias_.value.fill(0.0);
}

void SupervisedHead::set_target_normalization(double mean, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("target scale must be positive");
  target_mean_ = mean;
  target_scale_ = scale;
}

std::vector<double> SupervisedHead::logits(std::span<const double> features) const {
  if (features.size() != weight_.value.dim(1)) throw ShapeError("head: feature dimension");
  std::vector<double> z(bias_.value.storage());
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double* w = weight_.value.row(c);
    for (std::size_t j = 0; j < features.size(); ++j) z[c] += w[j] * features[j];
  }
  return z;
}

double SupervisedHead::output_loss(std::span<const double> features, std::size_t label,
                                   double target, std::vector<double>& grad_z) const {
  const std::vector<double> z = logits(features);
  grad_z.assign(z.size(), 0.0);
  if (kind_ == HeadKind::kCategorical) {
    if (label >= z.size()) throw std::invalid_argument("head: label out of range");
    const Tensor probs = softmax_axis(Tensor::from(z), 0);
    for (std::size_t c = 0; c < z.size(); ++c) grad_z[c] = probs[c] - (c == label ? 1.0 : 0.0);
    return -std::log(std::max(probs[label], 1e-300));
  }
  const double residual = z[0] - (target - target_mean_) / target_scale_;
  grad_z[0] = 2.0 * residual;
  return residual * residual;
}

double SupervisedHead::loss(std::span<const double> features, std::size_t label,
                            double target) const {
  std::vector<double> grad_z;
  return output_loss(features, label, target, grad_z);
}

double SupervisedHead::loss(std::span<const double> features, std::size_t label, double target,
                            std::span<double> grad_features) {
  std::vector<double> grad_z;
  const double value = output_loss(features, label, target, grad_z);
  for (std::size_t c = 0; c < grad_z.size(); ++c) {
    double* gw = weight_.grad.row(c);
    for (std::size_t j = 0; j < features.size(); ++j) gw[j] += grad_z[c] * features[j];
    bias_.grad[c] += grad_z[c];
  }
  if (!grad_features.empty()) {
    std::fill(grad_features.begin(), grad_features.end(), 0.0);
    for (std::size_t c = 0; c < grad_z.size(); ++c) {
      const double* w = weight_.value.row(c);
      for (std::size_t j = 0; j < features.size(); ++j) grad_features[j] += grad_z[c] * w[j];
    }
  }
  return value;
}

std::vector<double> SupervisedHead::predict(std::span<const double> features) const {
  std::vector<double> z = logits(features);
  if (kind_ == HeadKind::kNumeric) return {z[0] * target_scale_ + target_mean_};
  return softmax_axis(Tensor::from(z), 0).storage();
}

std::vector<double> train_head_frozen(SupervisedHead& head,
                                      std::span<const std::vector<double>> features,
                                      std::span<const std::size_t> labels,
                                      std::span<const double> targets, double learning_rate,
                                      std::size_t iterations) {
  if (features.empty()) throw std::invalid_argument("train_head_frozen: no samples");
  const bool categorical = head.kind() == HeadKind::kCategorical;
  if ((categorical ? labels.size() : targets.size()) != features.size()) {
    throw std::invalid_argument("train_head_frozen: one label per sample is required");
  }
  const double inv_n = 1.0 / static_cast<double>(features.size());
  auto params = head.parameters();
  std::vector<double> history;
  auto pass = [&] {
    for (Parameter* p : params) p->zero_grad();
    double total = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      total +=
          head.loss(features[i], categorical ? labels[i] : 0, categorical ? 0.0 : targets[i], {});
    }
    return total * inv_n;
  };
  for (std::size_t it = 0; it < iterations; ++it) {
    history.push_back(pass());
    for (Parameter* p : params) {
      for (std::size_t k = 0; k < p->value.size(); ++k) {
        p->value[k] -= learning_rate * inv_n * p->grad[k];
      }
    }
  }
  history.push_back(pass());
  for (Parameter* p : params) p->zero_grad();
  return history;
}

FinetuneResult semi_supervised_finetune(const Model& model,
                                        const std::vector<UserArchive>& archives,
                                        const std::string& attribute,
                                        const TrainConfig& train_config,
                                        const EvalConfig& eval_config) {
  bool categorical = true;
  for (const auto& a : archives) {
    if (auto it = a.labels.find(attribute); it != a.labels.end()) {
      categorical = std::holds_alternative<std::string>(it->second);
      break;
    }
  }
  const AttributeTask task = attribute_task(archives, attribute, categorical);
  const UserSplit split = split_labels(task.users.size(), {0.6, 0.1, 0.3}, eval_config.eval_seed);
  const std::size_t dim = model.config().arch.embedding_dim;

  FinetuneResult result{model,
                        SupervisedHead(categorical ? HeadKind::kCategorical : HeadKind::kNumeric,
                                       dim, std::max<std::size_t>(task.class_names.size(), 2)),
                        {},
                        {},
                        {}};
  Rng head_rng = Rng(eval_config.eval_seed).fork(kHeadInitStream);
  result.head.initialize(head_rng);
  if (!categorical) {
    double mean = 0.0;
    for (std::size_t i : split.train) mean += task.targets[i];
    mean /= static_cast<double>(split.train.size());
    double var = 0.0;
    for (std::size_t i : split.train) var += (task.targets[i] - mean) * (task.targets[i] - mean);
    const double sd = std::sqrt(var / static_cast<double>(split.train.size()));
    result.head.set_target_normalization(mean, sd > 0.0 ? sd : 1.0);
  }

  std::map<std::size_t, std::size_t> row_of_user;  // archive index -> task row
  for (std::size_t i : split.train) row_of_user[task.users[i]] = i;

  if (eval_config.freeze_body) {
    std::vector<std::vector<double>> features;
    std::vector<std::size_t> labels;
    std::vector<double> targets;
    for (std::size_t i : split.train) {
      features.push_back(result.model.embed_days(archives[task.users[i]].days).vector);
      labels.push_back(categorical ? task.classes[i] : 0);
      targets.push_back(categorical ? 0.0 : task.targets[i]);
    }
    result.head_history =
        train_head_frozen(result.head, features, labels, targets,
                          eval_config.finetune_learning_rate, eval_config.finetune_epochs);
  } else {
    std::vector<std::size_t> anchors;
    for (std::size_t i : split.train) anchors.push_back(task.users[i]);
    // Negatives may come from any user outside the held-out labelled users.
    std::vector<std::size_t> pool;
    std::vector<bool> held_out(archives.size(), false);
    for (std::size_t i : split.valid) held_out[task.users[i]] = true;
    for (std::size_t i : split.test) held_out[task.users[i]] = true;
    for (std::size_t u = 0; u < archives.size(); ++u) {
      if (!held_out[u]) pool.push_back(u);
    }

    std::vector<Parameter*> params = result.model.parameters();
    for (Parameter* p : result.head.parameters()) params.push_back(p);
    AdamState adam = AdamState::for_parameters(params);
    Rng rng = Rng(eval_config.eval_seed).fork(kFinetuneStream);

    ReferenceHook hook = [&](std::size_t anchor, std::span<const double> reference,
                             std::span<double> grad) {
      const std::size_t row = row_of_user.at(anchor);
      return result.head.loss(reference, categorical ? task.classes[row] : 0,
                              categorical ? 0.0 : task.targets[row], grad);
    };
    // The head accumulates its parameter gradient unscaled inside the hook;
    // rescale it to match the weighted objective before each update.
    for (std::size_t epoch = 0; epoch < eval_config.finetune_epochs; ++epoch) {
      std::vector<std::size_t> order = anchors;
      rng.shuffle(order);
      for (std::size_t begin = 0; begin < order.size(); begin += train_config.batch_size) {
        const std::size_t end = std::min(order.size(), begin + train_config.batch_size);
        const std::span<const std::size_t> batch(order.data() + begin, end - begin);
        const TripletSample sample =
            sample_triplet_batch(archives, batch, pool, train_config.triplet_sizes(), rng);
        for (Parameter* p : params) p->zero_grad();
        const LossBreakdown loss = accumulate_gradients(
            result.model, archives, sample, train_config, hook, eval_config.head_weight);
        if (!std::isfinite(loss.total())) {
          throw DivergenceError("non-finite fine-tuning loss");
        }
        const double head_scale = eval_config.head_weight / static_cast<double>(batch.size());
        for (Parameter* p : result.head.parameters()) p->grad *= head_scale;
        adam_update(params, adam, eval_config.finetune_learning_rate);
        result.steps.push_back(loss);
      }
    }
  }

  std::vector<std::size_t> labels;
  std::vector<std::size_t> predictions;
  std::vector<double> scores;
  std::vector<double> targets;
  std::vector<double> estimates;
  for (std::size_t i : split.test) {
    const auto features = result.model.embed_days(archives[task.users[i]].days).vector;
    const auto out = result.head.predict(features);
    if (categorical) {
      labels.push_back(task.classes[i]);
      predictions.push_back(
          static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin()));
      scores.push_back(out.size() > 1 ? out[1] : 0.0);
    } else {
      targets.push_back(task.targets[i]);
      estimates.push_back(out[0]);
    }
  }
  const std::string name = "finetune." + attribute;
  if (categorical) {
    const std::size_t n_classes = task.class_names.size();
    result.report = classification_metrics(
        name, labels, predictions,
        n_classes == 2 ? std::span<const double>(scores) : std::span<const double>(), n_classes);
  } else {
    result.report = regression_metrics(name, targets, estimates);
  }
  return result;
}

}  // namespace wearembed
