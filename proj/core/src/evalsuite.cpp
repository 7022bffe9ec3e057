// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/evalsuite.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <variant>

#include "wearembed/rng.hpp"
#include "wearembed/siamese.hpp"

namespace wearembed {
namespace {

constexpr std::uint64_t kTrainPeriodStream = 1;
constexpr std::uint64_t kTestPeriodStream = 2;

std::vector<double> hadamard(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

std::string attribute_list(const std::vector<UserArchive>& archives) {
  std::string out;
  for (const auto& name : available_attributes(archives)) {
    out += out.empty() ? name : ", " + name;
  }
  return out.empty() ? "(none)" : out;
}

std::vector<double> user_vector(const Model& model, const UserArchive& archive) {
  return model.embed_days(archive.days).vector;
}

}  // namespace

PeriodTrials identification_trials(const Aggregator& aggregator,
                                   const std::vector<UserArchive>& archives,
                                   const std::vector<std::vector<std::vector<double>>>& embeddings,
                                   DateRange period, const EvalConfig& config, Rng rng) {
  std::vector<std::vector<std::size_t>> in_period(archives.size());
  std::vector<std::size_t> present;
  for (std::size_t u = 0; u < archives.size(); ++u) {
    for (std::size_t d = 0; d < archives[u].days.size(); ++d) {
      const Date date = archives[u].days[d].date;
      if (date >= period.begin && date < period.end) in_period[u].push_back(d);
    }
    if (!in_period[u].empty()) present.push_back(u);
  }

  PeriodTrials out;
  const std::size_t needed = config.support_size + 1;
  for (std::size_t u = 0; u < archives.size(); ++u) {
    if (in_period[u].size() < needed || present.size() < 2) {
      ++out.skipped_users;
      continue;
    }
    std::vector<std::size_t> days = in_period[u];
    std::vector<std::size_t> others;
    for (std::size_t v : present) {
      if (v != u) others.push_back(v);
    }
    for (std::size_t t = 0; t < config.trials_per_user; ++t) {
      for (std::size_t i = 0; i < needed; ++i) {
        std::swap(days[i], days[i + rng.index(days.size() - i)]);
      }
      IdentificationTrial trial;
      std::vector<std::vector<double>> reference;
      std::vector<Date> dates;
      for (std::size_t i = 0; i < config.support_size; ++i) {
        trial.reference.push_back({u, days[i]});
        reference.push_back(embeddings[u][days[i]]);
        dates.push_back(archives[u].days[days[i]].date);
      }
      const auto ref = aggregate_embeddings(reference, dates, aggregator).vector;
      trial.positive = {u, days[config.support_size]};

      const std::size_t other = others[rng.index(others.size())];
      const auto& negative_days = in_period[other];
      trial.negative = {other, negative_days[rng.index(negative_days.size())]};

      trial.positive_features = hadamard(ref, embeddings[u][trial.positive.day]);
      trial.negative_features = hadamard(ref, embeddings[other][trial.negative.day]);
      out.trials.push_back(std::move(trial));
    }
  }
  return out;
}

IdentificationResult identification_from_embeddings(
    const Aggregator& aggregator, const std::vector<UserArchive>& archives,
    const std::vector<std::vector<std::vector<double>>>& day_embeddings, DateRange train_period,
    DateRange test_period, const EvalConfig& config) {
  if (day_embeddings.size() != archives.size()) {
    throw std::invalid_argument("identification: one embedding list per user is required");
  }
  if (train_period.end > test_period.begin) {
    throw std::invalid_argument("identification: train period must end before the test period");
  }
  const Rng root(config.eval_seed);
  const PeriodTrials train = identification_trials(
      aggregator, archives, day_embeddings, train_period, config, root.fork(kTrainPeriodStream));
  const PeriodTrials test = identification_trials(aggregator, archives, day_embeddings, test_period,
                                                  config, root.fork(kTestPeriodStream));
  if (train.trials.empty() || test.trials.empty()) {
    throw std::invalid_argument("identification: a period has no eligible users");
  }
  std::vector<LabeledEmbedding> train_samples;
  for (const auto& t : train.trials) {
    const std::string& user = archives[t.positive.user].user_id;
    train_samples.push_back({t.positive_features, 1, 0.0, user});
    train_samples.push_back({t.negative_features, 0, 0.0, user});
  }
  const LogisticClassifier probe = fit_logistic(train_samples, config.logistic);

  std::vector<std::size_t> labels;
  std::vector<std::size_t> predictions;
  std::vector<double> scores;
  auto score = [&](const std::vector<double>& features, std::size_t label) {
    const auto p = probe.predict_proba(features);
    labels.push_back(label);
    predictions.push_back(p[1] > p[0] ? 1 : 0);
    scores.push_back(p[1]);
  };
  for (const auto& t : test.trials) {
    score(t.positive_features, 1);
    score(t.negative_features, 0);
  }
  MetricReport full = classification_metrics("identify", labels, predictions, scores, 2);
  IdentificationResult result;
  result.report.task = "identify";
  for (const char* key : {"f1", "accuracy", "auc"}) {
    if (auto it = full.metrics.find(key); it != full.metrics.end()) {
      result.report.metrics[key] = it->second;
    }
  }
  result.train_trials = train.trials.size();
  result.test_trials = test.trials.size();
  result.skipped_users = train.skipped_users + test.skipped_users;
  return result;
}

IdentificationResult user_identification_eval(const Model& model,
                                              const std::vector<UserArchive>& archives,
                                              DateRange train_period, DateRange test_period,
                                              const EvalConfig& config) {
  std::vector<std::vector<std::vector<double>>> embeddings(archives.size());
  for (std::size_t u = 0; u < archives.size(); ++u) {
    for (const auto& day : archives[u].days) embeddings[u].push_back(model.embed_day(day));
  }
  return identification_from_embeddings(model.aggregator(), archives, embeddings, train_period,
                                        test_period, config);
}

std::pair<DateRange, DateRange> identification_periods(const std::vector<UserArchive>& archives,
                                                       const EvalConfig& config) {
  Date first = Date::max();
  Date last = Date::min();
  for (const auto& a : archives) {
    for (const auto& d : a.days) {
      first = std::min(first, d.date);
      last = std::max(last, d.date);
    }
  }
  if (first > last) throw std::invalid_argument("identification: no days");
  const Date end = config.identify_test_end.value_or(last + std::chrono::days(1));
  const Date split = config.identify_train_end.value_or(first + (end - first) / 2);
  if (!(first < split && split < end)) {
    throw std::invalid_argument("identification: split date outside the data range");
  }
  return {{first, split}, {split, end}};
}

IdentificationResult user_identification_eval(const Model& model,
                                              const std::vector<UserArchive>& archives,
                                              const EvalConfig& config) {
  const auto [train, test] = identification_periods(archives, config);
  return user_identification_eval(model, archives, train, test, config);
}

std::vector<DayEmbedding> embed_all_days(const Model& model,
                                         const std::vector<UserArchive>& archives) {
  std::vector<DayEmbedding> out;
  for (const auto& a : archives) {
    for (const auto& day : a.days) out.push_back(encode_day(day, model.autoencoder()));
  }
  return out;
}

SimilarityGap day_similarity_gap(std::span<const DayEmbedding> embeddings) {
  double intra = 0.0;
  double inter = 0.0;
  std::size_t n_intra = 0;
  std::size_t n_inter = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
      const double s = embedding_similarity(embeddings[i].vector, embeddings[j].vector).value;
      if (embeddings[i].user_id == embeddings[j].user_id) {
        intra += s;
        ++n_intra;
      } else {
        inter += s;
        ++n_inter;
      }
    }
  }
  SimilarityGap gap;
  if (n_intra) gap.intra = intra / static_cast<double>(n_intra);
  if (n_inter) gap.inter = inter / static_cast<double>(n_inter);
  return gap;
}

std::vector<std::string> available_attributes(const std::vector<UserArchive>& archives) {
  std::set<std::string> names;
  for (const auto& a : archives) {
    for (const auto& [name, value] : a.labels) names.insert(name);
  }
  return {names.begin(), names.end()};
}

AttributeTask attribute_task(const std::vector<UserArchive>& archives, const std::string& attribute,
                             bool categorical) {
  AttributeTask task;
  task.attribute = attribute;
  task.categorical = categorical;
  std::set<std::string> names;
  for (std::size_t u = 0; u < archives.size(); ++u) {
    auto it = archives[u].labels.find(attribute);
    if (it == archives[u].labels.end()) continue;
    const bool is_text = std::holds_alternative<std::string>(it->second);
    if (is_text != categorical) {
      throw AttributeError("attribute '" + attribute + "' is " +
                           (is_text ? "categorical" : "numeric") +
                           "; available attributes: " + attribute_list(archives));
    }
    task.users.push_back(u);
    if (is_text) names.insert(std::get<std::string>(it->second));
  }
  if (task.users.empty()) {
    throw AttributeError("unknown attribute '" + attribute +
                         "'; available attributes: " + attribute_list(archives));
  }
  task.class_names.assign(names.begin(), names.end());
  for (std::size_t u : task.users) {
    const Label& label = archives[u].labels.at(attribute);
    if (categorical) {
      const auto& name = std::get<std::string>(label);
      task.classes.push_back(static_cast<std::size_t>(
          std::lower_bound(task.class_names.begin(), task.class_names.end(), name) -
          task.class_names.begin()));
    } else {
      task.targets.push_back(std::get<double>(label));
    }
  }
  return task;
}

MetricReport classification_eval(const Model& model, const std::vector<UserArchive>& archives,
                                 const std::string& attribute, const EvalConfig& config) {
  const AttributeTask task = attribute_task(archives, attribute, true);
  const UserSplit split = split_labels(task.users.size(), {0.6, 0.1, 0.3}, config.eval_seed);
  auto sample = [&](std::size_t i) {
    return LabeledEmbedding{user_vector(model, archives[task.users[i]]), task.classes[i], 0.0,
                            archives[task.users[i]].user_id};
  };
  std::vector<LabeledEmbedding> train;
  for (std::size_t i : split.train) train.push_back(sample(i));
  const LogisticClassifier probe = fit_logistic(train, config.logistic);

  std::vector<std::size_t> labels;
  std::vector<std::size_t> predictions;
  std::vector<double> scores;
  for (std::size_t i : split.test) {
    const auto s = sample(i);
    const auto p = probe.predict_proba(s.features);
    labels.push_back(s.label);
    predictions.push_back(probe.predict(s.features));
    scores.push_back(p.size() > 1 ? p[1] : 0.0);
  }
  const std::size_t n_classes = task.class_names.size();
  return classification_metrics(
      "classify." + attribute, labels, predictions,
      n_classes == 2 ? std::span<const double>(scores) : std::span<const double>(), n_classes);
}

MetricReport regression_eval(const Model& model, const std::vector<UserArchive>& archives,
                             const std::string& attribute, const EvalConfig& config) {
  const AttributeTask task = attribute_task(archives, attribute, false);
  const UserSplit split = split_labels(task.users.size(), {0.6, 0.1, 0.3}, config.eval_seed);
  auto sample = [&](std::size_t i) {
    return LabeledEmbedding{user_vector(model, archives[task.users[i]]), 0, task.targets[i],
                            archives[task.users[i]].user_id};
  };
  std::vector<LabeledEmbedding> train;
  for (std::size_t i : split.train) train.push_back(sample(i));
  const LinearRegressor probe = fit_linear(train);
  std::vector<double> targets;
  std::vector<double> predictions;
  for (std::size_t i : split.test) {
    const auto s = sample(i);
    targets.push_back(s.target);
    predictions.push_back(probe.predict(s.features));
  }
  return regression_metrics("regress." + attribute, targets, predictions);
}

}  // namespace wearembed
