// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>

namespace wearembed {

struct MetricReport {
  std::string task;
  std::map<std::string, double> metrics;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// One `task.metric=value` line per metric, six decimals, LF endings.
std::string format_report(const MetricReport& report);
std::string format_reports(std::span<const MetricReport> reports);

/// Mann-Whitney statistic: share of (positive, negative) pairs ranked
/// correctly, ties counting one half. Empty when either class is absent.
/// labels are 0 or 1.
std::optional<double> roc_auc(std::span<const std::size_t> labels, std::span<const double> scores);

/// 2 tp / (2 tp + fp + fn); 0 when all three counts are zero.
double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

/// Binary (n_classes == 2): accuracy, f1 for class 1, auc when defined and
/// `positive_scores` is non-empty, micro_f1, macro_f1. Multiclass: accuracy,
/// micro_f1, macro_f1. Macro-F1 averages classes that occur in labels or
/// predictions.
MetricReport classification_metrics(const std::string& task, std::span<const std::size_t> labels,
                                    std::span<const std::size_t> predictions,
                                    std::span<const double> positive_scores, std::size_t n_classes);

/// mse and mae.
MetricReport regression_metrics(const std::string& task, std::span<const double> targets,
                                std::span<const double> predictions);

}  // namespace wearembed
