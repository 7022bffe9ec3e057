// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wearembed/errors.hpp"

namespace wearembed {
namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

TripletBatch sample_one(const std::vector<UserArchive>& archives, std::size_t anchor,
                        std::span<const std::size_t> pool, const TripletSizes& sizes, Rng& rng,
                        bool& fallback) {
  const std::size_t n_days = archives.at(anchor).days.size();
  if (n_days == 0) {
    throw std::invalid_argument("user " + archives[anchor].user_id + " has no days");
  }
  TripletBatch batch;
  batch.anchor = anchor;
  const std::size_t wanted = sizes.reference + sizes.positive;
  fallback = n_days < wanted;
  if (fallback) {
    for (std::size_t i = 0; i < sizes.reference; ++i) {
      batch.reference.push_back({anchor, rng.index(n_days)});
    }
    for (std::size_t i = 0; i < sizes.positive; ++i) {
      batch.positive.push_back({anchor, rng.index(n_days)});
    }
  } else {
    // Partial Fisher-Yates: the first `wanted` slots are a uniform draw
    // without replacement.
    std::vector<std::size_t> order(n_days);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < wanted; ++i) {
      std::swap(order[i], order[i + rng.index(n_days - i)]);
    }
    for (std::size_t i = 0; i < sizes.reference; ++i) batch.reference.push_back({anchor, order[i]});
    for (std::size_t i = sizes.reference; i < wanted; ++i) {
      batch.positive.push_back({anchor, order[i]});
    }
  }

  std::vector<std::size_t> others;
  for (std::size_t u : pool) {
    if (u != anchor && !archives.at(u).days.empty()) others.push_back(u);
  }
  if (others.empty()) {
    throw std::invalid_argument("no other user available to draw negatives for " +
                                archives[anchor].user_id);
  }
  std::vector<std::size_t> chosen;
  while (chosen.size() < sizes.negative) {
    std::vector<std::size_t> round = others;
    const std::size_t take = std::min(round.size(), sizes.negative - chosen.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(round[i], round[i + rng.index(round.size() - i)]);
      chosen.push_back(round[i]);
    }
  }
  for (std::size_t u : chosen) batch.negative.push_back({u, rng.index(archives[u].days.size())});
  return batch;
}

}  // namespace

TripletSample sample_triplet_batch(const std::vector<UserArchive>& archives,
                                   std::span<const std::size_t> anchors,
                                   std::span<const std::size_t> negative_pool,
                                   const TripletSizes& sizes, Rng& rng) {
  if (anchors.empty()) throw std::invalid_argument("sample_triplet_batch: empty anchor list");
  if (sizes.reference == 0 || sizes.positive == 0 || sizes.negative == 0) {
    throw std::invalid_argument("sample_triplet_batch: set sizes must be positive");
  }
  TripletSample sample;
  for (std::size_t anchor : anchors) {
    bool fallback = false;
    sample.batches.push_back(sample_one(archives, anchor, negative_pool, sizes, rng, fallback));
    if (fallback) ++sample.warnings;
  }
  return sample;
}

Similarity embedding_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("embedding_similarity: length mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return {0.0, true};
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += (a[i] / na) * (b[i] / nb);
  return {std::clamp(dot, -1.0, 1.0), false};
}

SimilarityGrad embedding_similarity_backward(std::span<const double> a, std::span<const double> b,
                                             double scale) {
  if (a.size() != b.size()) throw ShapeError("embedding_similarity_backward: length mismatch");
  SimilarityGrad grad{std::vector<double>(a.size(), 0.0), std::vector<double>(b.size(), 0.0)};
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return grad;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  const double s = dot / (na * nb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    grad.a[i] = scale * (b[i] / (na * nb) - s * a[i] / (na * na));
    grad.b[i] = scale * (a[i] / (na * nb) - s * b[i] / (nb * nb));
  }
  return grad;
}

TripletLoss siamese_triplet_loss(std::span<const double> reference,
                                 std::span<const std::vector<double>> positives,
                                 std::span<const std::vector<double>> negatives, double margin) {
  if (positives.empty() || negatives.empty()) {
    throw std::invalid_argument(
        "siamese_triplet_loss: positive and negative sets must be non-empty");
  }
  TripletLoss loss;
  const std::size_t dim = reference.size();
  loss.grad_reference.assign(dim, 0.0);
  loss.grad_positives.assign(positives.size(), std::vector<double>(dim, 0.0));
  loss.grad_negatives.assign(negatives.size(), std::vector<double>(dim, 0.0));

  std::vector<double> sim_pos;
  std::vector<double> sim_neg;
  for (const auto& p : positives) sim_pos.push_back(embedding_similarity(reference, p).value);
  for (const auto& q : negatives) sim_neg.push_back(embedding_similarity(reference, q).value);

  // d L / d sim for every similarity term.
  std::vector<double> weight_pos(positives.size(), 0.0);
  std::vector<double> weight_neg(negatives.size(), 0.0);
  for (std::size_t p = 0; p < positives.size(); ++p) {
    for (std::size_t q = 0; q < negatives.size(); ++q) {
      const double hinge = triplet_hinge(sim_pos[p], sim_neg[q], margin);
      if (hinge > 0.0) {
        loss.value += hinge;
        ++loss.active_pairs;
        weight_pos[p] -= 1.0;
        weight_neg[q] += 1.0;
      }
    }
  }
  auto add = [](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  for (std::size_t p = 0; p < positives.size(); ++p) {
    if (weight_pos[p] == 0.0) continue;
    auto g = embedding_similarity_backward(reference, positives[p], weight_pos[p]);
    add(loss.grad_reference, g.a);
    loss.grad_positives[p] = std::move(g.b);
  }
  for (std::size_t q = 0; q < negatives.size(); ++q) {
    if (weight_neg[q] == 0.0) continue;
    auto g = embedding_similarity_backward(reference, negatives[q], weight_neg[q]);
    add(loss.grad_reference, g.a);
    loss.grad_negatives[q] = std::move(g.b);
  }
  return loss;
}

double triplet_hinge(double sim_positive, double sim_negative, double margin) {
  return std::max(0.0, sim_negative + (margin - sim_positive));
}

LossBreakdown joint_loss(double l_ae, double l_s, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("joint_loss: lambda must be non-negative");
  LossBreakdown out;
  out.l_ae = l_ae;
  out.l_s = l_s;
  out.lambda = lambda;
  out.l_joint = l_ae + lambda * l_s;
  return out;
}

}  // namespace wearembed
