// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "wearembed/text_format.hpp"

namespace wearembed {

std::string format_report(const MetricReport& report) {
  std::string out;
  for (const auto& [name, value] : report.metrics) {
    out += report.task + "." + name + "=" + format_fixed(value, 6) + "\n";
  }
  return out;
}

std::string format_reports(std::span<const MetricReport> reports) {
  std::string out;
  for (const auto& r : reports) out += format_report(r);
  return out;
}

std::optional<double> roc_auc(std::span<const std::size_t> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw std::invalid_argument("roc_auc: labels and scores differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Rank sum of positives with ties sharing their mid rank, kept in half
  // units so the arithmetic stays in integers.
  std::size_t n_pos = 0;
  std::size_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::size_t twice_mid_rank = (i + 1) + j;  // 2 * (i+1 + j) / 2
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        ++n_pos;
        twice_rank_sum += twice_mid_rank;
      }
    }
    i = j;
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  // Twice the count of correctly ordered pairs (ties count 1 here).
  const std::size_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos * n_neg));
}

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

MetricReport classification_metrics(const std::string& task, std::span<const std::size_t> labels,
                                    std::span<const std::size_t> predictions,
                                    std::span<const double> positive_scores,
                                    std::size_t n_classes) {
  if (labels.size() != predictions.size()) {
    throw std::invalid_argument("classification_metrics: length mismatch");
  }
  if (labels.empty()) throw std::invalid_argument("classification_metrics: no samples");
  MetricReport report{task, {}};
  std::size_t correct = 0;
  std::set<std::size_t> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == predictions[i]) ++correct;
    classes.insert(labels[i]);
    classes.insert(predictions[i]);
  }
  const double n = static_cast<double>(labels.size());
  report.metrics["accuracy"] = static_cast<double>(correct) / n;

  std::size_t tp_total = 0;
  std::size_t fp_total = 0;
  std::size_t fn_total = 0;
  double macro = 0.0;
  for (std::size_t c : classes) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (predictions[i] == c && labels[i] == c) ++tp;
      if (predictions[i] == c && labels[i] != c) ++fp;
      if (predictions[i] != c && labels[i] == c) ++fn;
    }
    tp_total += tp;
    fp_total += fp;
    fn_total += fn;
    macro += f1_from_counts(tp, fp, fn);
  }
  report.metrics["macro_f1"] = macro / static_cast<double>(classes.size());
  report.metrics["micro_f1"] = f1_from_counts(tp_total, fp_total, fn_total);

  if (n_classes == 2) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (predictions[i] == 1 && labels[i] == 1) ++tp;
      if (predictions[i] == 1 && labels[i] != 1) ++fp;
      if (predictions[i] != 1 && labels[i] == 1) ++fn;
    }
    report.metrics["f1"] = f1_from_counts(tp, fp, fn);
    if (!positive_scores.empty()) {
      if (auto auc = roc_auc(labels, positive_scores)) report.metrics["auc"] = *auc;
    }
  }
  return report;
}

MetricReport regression_metrics(const std::string& task, std::span<const double> targets,
                                std::span<const double> predictions) {
  if (targets.size() != predictions.size()) {
    throw std::invalid_argument("regression_metrics: length mismatch");
  }
  if (targets.empty()) throw std::invalid_argument("regression_metrics: no samples");
  double se = 0.0;
  double ae = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = predictions[i] - targets[i];
    se += d * d;
    ae += std::abs(d);
  }
  const double n = static_cast<double>(targets.size());
  return {task, {{"mse", se / n}, {"mae", ae / n}}};
}

}  // namespace wearembed
