// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

// Reference / positive / negative sampling and the triplet hinge loss.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wearembed/datapipe.hpp"
#include "wearembed/rng.hpp"

namespace wearembed {

/// Position of one day inside a vector<UserArchive>.
struct DayRef {
  std::size_t user = 0;
  std::size_t day = 0;

  friend auto operator<=>(const DayRef&, const DayRef&) = default;
};

struct TripletSizes {
  std::size_t reference = 6;
  std::size_t positive = 2;
  std::size_t negative = 4;
};

struct TripletBatch {
  std::size_t anchor = 0;
  std::vector<DayRef> reference;
  std::vector<DayRef> positive;
  std::vector<DayRef> negative;
};

struct TripletSample {
  std::vector<TripletBatch> batches;  // one per anchor, in anchor order
  /// Anchors whose reference and positive sets had to be drawn with
  /// replacement because the user has too few days.
  std::size_t warnings = 0;
};

/// Negatives come from users in `negative_pool` other than the anchor. Each
/// anchor draws distinct other users while they last, then repeats users.
/// Throws std::invalid_argument for an empty anchor list, an anchor without
/// days or a pool with no other user.
TripletSample sample_triplet_batch(const std::vector<UserArchive>& archives,
                                   std::span<const std::size_t> anchors,
                                   std::span<const std::size_t> negative_pool,
                                   const TripletSizes& sizes, Rng& rng);

struct Similarity {
  double value = 0.0;
  bool degenerate = false;  // a zero-norm argument
};

/// Cosine similarity; 0 with the degenerate flag when either norm is zero.
Similarity embedding_similarity(std::span<const double> a, std::span<const double> b);

struct SimilarityGrad {
  std::vector<double> a;
  std::vector<double> b;
};

/// Gradient of the cosine similarity times `scale`; zero when degenerate.
SimilarityGrad embedding_similarity_backward(std::span<const double> a, std::span<const double> b,
                                             double scale = 1.0);

/// One pair's term: max(0, sim_negative - sim_positive + margin).
double triplet_hinge(double sim_positive, double sim_negative, double margin);

struct TripletLoss {
  double value = 0.0;
  std::size_t active_pairs = 0;
  std::vector<double> grad_reference;
  std::vector<std::vector<double>> grad_positives;
  std::vector<std::vector<double>> grad_negatives;
};

/// sum over (p, q) of max(0, sim(ref, q) - sim(ref, p) + margin), with
/// gradients. Throws std::invalid_argument on an empty positive or negative
/// set.
TripletLoss siamese_triplet_loss(std::span<const double> reference,
                                 std::span<const std::vector<double>> positives,
                                 std::span<const std::vector<double>> negatives, double margin);

struct LossBreakdown {
  double l_ae = 0.0;
  double l_s = 0.0;
  double l_joint = 0.0;
  double lambda = 0.0;
  /// Supervised head extension; zero outside fine-tuning.
  double head_loss = 0.0;
  double head_weight = 0.0;

  double total() const { return l_joint + head_weight * head_loss; }
};

/// l_joint = l_ae + lambda * l_s. Throws for negative lambda.
LossBreakdown joint_loss(double l_ae, double l_s, double lambda);

}  // namespace wearembed
