// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Downstream evaluation protocols over a trained model.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wearembed/autoencoder.hpp"
#include "wearembed/classifiers.hpp"
#include "wearembed/datapipe.hpp"
#include "wearembed/metrics.hpp"
#include "wearembed/model.hpp"
#include "wearembed/rng.hpp"
#include "wearembed/siamese.hpp"

namespace wearembed {

struct EvalConfig {
  std::uint64_t eval_seed = 11;
  /// Reference days aggregated per identification trial.
  std::size_t support_size = 6;
  std::size_t trials_per_user = 200;
  /// First test-period day for identification; the data midpoint when unset.
  std::optional<Date> identify_train_end;
  /// Exclusive end of the test period; one past the last day when unset.
  std::optional<Date> identify_test_end;
  LogisticOptions logistic;
  /// Weight of the supervised head loss during fine-tuning.
  double head_weight = 1.0;
  std::size_t finetune_epochs = 20;
  double finetune_learning_rate = 5e-4;
  /// Train only the head on fixed user embeddings.
  bool freeze_body = false;
};

/// Requested attribute is missing or has the wrong kind. what() lists the
/// attributes that are available.
class AttributeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DateRange {
  Date begin{};
  Date end{};  // exclusive
};

struct IdentificationResult {
  MetricReport report;  // f1, accuracy, auc
  std::size_t train_trials = 0;
  std::size_t test_trials = 0;
  std::size_t skipped_users = 0;  // per period, too few days
};

/// Trials per period: for each user with at least support_size + 1 days in
/// the period, aggregate support_size days into a reference vector, then
/// pair it with one unused day of the same user (label 1) and one day of a
/// random other user from the same period (label 0). A trial's features are
/// reference * query element-wise. The probe is fitted on train-period
/// trials only and scored on test-period trials.
IdentificationResult user_identification_eval(const Model& model,
                                              const std::vector<UserArchive>& archives,
                                              DateRange train_period, DateRange test_period,
                                              const EvalConfig& config);

struct IdentificationTrial {
  std::vector<DayRef> reference;  // support_size days of one user
  DayRef positive;                // another day of that user
  DayRef negative;                // a day of some other user
  std::vector<double> positive_features;
  std::vector<double> negative_features;
};

struct PeriodTrials {
  std::vector<IdentificationTrial> trials;
  std::size_t skipped_users = 0;
};

/// Trials drawn from the days dated inside `period`, user by user, with
/// `rng`. Users with fewer than support_size + 1 days there are skipped.
PeriodTrials identification_trials(
    const Aggregator& aggregator, const std::vector<UserArchive>& archives,
    const std::vector<std::vector<std::vector<double>>>& day_embeddings, DateRange period,
    const EvalConfig& config, Rng rng);

/// The same protocol over precomputed day embeddings, indexed
/// [user][day] like `archives`.
IdentificationResult identification_from_embeddings(
    const Aggregator& aggregator, const std::vector<UserArchive>& archives,
    const std::vector<std::vector<std::vector<double>>>& day_embeddings, DateRange train_period,
    DateRange test_period, const EvalConfig& config);

/// Default periods: [first day, split) and [split, test end) where split is
/// config.identify_train_end or the midpoint of the data's date range.
std::pair<DateRange, DateRange> identification_periods(const std::vector<UserArchive>& archives,
                                                       const EvalConfig& config);

/// Splits the data date range at config.identify_train_end (or its
/// midpoint) and calls user_identification_eval.
IdentificationResult user_identification_eval(const Model& model,
                                              const std::vector<UserArchive>& archives,
                                              const EvalConfig& config);

/// Embeddings of every day, archive order.
std::vector<DayEmbedding> embed_all_days(const Model& model,
                                         const std::vector<UserArchive>& archives);

struct SimilarityGap {
  double intra = 0.0;  // mean cosine over same-user day pairs
  double inter = 0.0;  // mean cosine over different-user day pairs
  double gap() const { return intra - inter; }
};

SimilarityGap day_similarity_gap(std::span<const DayEmbedding> embeddings);

/// Sorted distinct attribute names over all users.
std::vector<std::string> available_attributes(const std::vector<UserArchive>& archives);

struct AttributeTask {
  std::string attribute;
  bool categorical = true;
  std::vector<std::string> class_names;  // sorted; categorical only
  /// Archive index and encoded label of each labelled user.
  std::vector<std::size_t> users;
  std::vector<std::size_t> classes;
  std::vector<double> targets;
};

/// Throws AttributeError when no user carries `attribute`, or when its kind
/// does not match `categorical`.
AttributeTask attribute_task(const std::vector<UserArchive>& archives, const std::string& attribute,
                             bool categorical);

/// User embeddings aggregated over all days; logistic probe fitted on the
/// train share of a 60/10/30 user split and scored on the test share.
MetricReport classification_eval(const Model& model, const std::vector<UserArchive>& archives,
                                 const std::string& attribute, const EvalConfig& config);

/// Same split with a linear least-squares probe; reports mse and mae.
MetricReport regression_eval(const Model& model, const std::vector<UserArchive>& archives,
                             const std::string& attribute, const EvalConfig& config);

}  // namespace wearembed
