// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/siamese.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"

namespace wearembed {
namespace {

std::vector<UserArchive> population(std::initializer_list<std::size_t> day_counts) {
  std::vector<UserArchive> archives;
  Date start = parse_date("2020-01-01");
  for (std::size_t n : day_counts) {
    UserArchive a;
    a.user_id = "u" + std::to_string(archives.size());
    for (std::size_t d = 0; d < n; ++d) {
      DayLongSeries day;
      day.user_id = a.user_id;
      day.date = start + std::chrono::days(d);
      a.days.push_back(std::move(day));
    }
    archives.push_back(std::move(a));
  }
  return archives;
}

std::vector<std::size_t> all_users(const std::vector<UserArchive>& archives) {
  std::vector<std::size_t> users(archives.size());
  for (std::size_t i = 0; i < users.size(); ++i) users[i] = i;
  return users;
}

double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

TEST(TripletSampler, TwoUsersDisjointSetsAndOtherUserNegatives) {
  const auto archives = population({10, 10});
  const auto users = all_users(archives);
  const std::vector<std::size_t> anchors{0, 1};
  Rng rng(3);
  const TripletSample s = sample_triplet_batch(archives, anchors, users, TripletSizes{}, rng);
  ASSERT_EQ(s.batches.size(), 2u);
  EXPECT_EQ(s.warnings, 0u);
  for (const TripletBatch& b : s.batches) {
    ASSERT_EQ(b.reference.size(), 6u);
    ASSERT_EQ(b.positive.size(), 2u);
    ASSERT_EQ(b.negative.size(), 4u);
    std::set<DayRef> seen;
    for (const DayRef& r : b.reference) {
      EXPECT_EQ(r.user, b.anchor);
      seen.insert(r);
    }
    for (const DayRef& p : b.positive) {
      EXPECT_EQ(p.user, b.anchor);
      seen.insert(p);
    }
    EXPECT_EQ(seen.size(), 8u) << "reference and positive days must be distinct";
    for (const DayRef& q : b.negative) {
      EXPECT_NE(q.user, b.anchor);
      EXPECT_LT(q.day, archives[q.user].days.size());
    }
  }
}

TEST(TripletSampler, SameSeedSameBatch) {
  const auto archives = population({10, 12, 9, 15});
  const auto users = all_users(archives);
  Rng a(42), b(42);
  const auto first = sample_triplet_batch(archives, users, users, TripletSizes{}, a);
  const auto second = sample_triplet_batch(archives, users, users, TripletSizes{}, b);
  ASSERT_EQ(first.batches.size(), second.batches.size());
  for (std::size_t i = 0; i < first.batches.size(); ++i) {
    EXPECT_EQ(first.batches[i].reference, second.batches[i].reference);
    EXPECT_EQ(first.batches[i].positive, second.batches[i].positive);
    EXPECT_EQ(first.batches[i].negative, second.batches[i].negative);
  }
  EXPECT_EQ(a, b);
}

TEST(TripletSampler, ShortUserFallsBackWithOneWarning) {
  const auto archives = population({7, 10});
  const auto users = all_users(archives);
  const std::vector<std::size_t> anchors{0};
  Rng rng(5);
  const auto s = sample_triplet_batch(archives, anchors, users, TripletSizes{}, rng);
  EXPECT_EQ(s.warnings, 1u);
  EXPECT_EQ(s.batches[0].reference.size(), 6u);
  EXPECT_EQ(s.batches[0].positive.size(), 2u);
  for (const DayRef& r : s.batches[0].reference) EXPECT_LT(r.day, 7u);
}

TEST(TripletSampler, NegativesUseDistinctUsersWhileTheyLast) {
  const auto archives = population({10, 3, 3, 3, 3, 3, 3});
  const auto users = all_users(archives);
  const std::vector<std::size_t> anchors{0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto s = sample_triplet_batch(archives, anchors, users, TripletSizes{}, rng);
    std::set<std::size_t> negative_users;
    for (const DayRef& q : s.batches[0].negative) negative_users.insert(q.user);
    EXPECT_EQ(negative_users.size(), 4u);
  }
  // Two other users for four negatives: each repeats twice.
  const auto few = population({10, 3, 3});
  const auto few_users = all_users(few);
  Rng rng(1);
  const auto s = sample_triplet_batch(few, anchors, few_users, TripletSizes{}, rng);
  std::size_t from_one = 0;
  for (const DayRef& q : s.batches[0].negative) from_one += q.user == 1;
  EXPECT_EQ(from_one, 2u);
}

TEST(TripletSampler, RejectsDegenerateRequests) {
  const auto archives = population({10, 10});
  const std::vector<std::size_t> none;
  const std::vector<std::size_t> only_first{0};
  Rng rng(1);
  EXPECT_THROW(sample_triplet_batch(archives, none, only_first, TripletSizes{}, rng),
               std::invalid_argument);
  EXPECT_THROW(sample_triplet_batch(archives, only_first, only_first, TripletSizes{}, rng),
               std::invalid_argument);
}

TEST(Similarity, Examples) {
  const std::vector<double> v{1.0, -2.0, 0.5};
  const std::vector<double> v3{3.0, -6.0, 1.5};
  EXPECT_DOUBLE_EQ(embedding_similarity(v, v).value, 1.0);
  EXPECT_DOUBLE_EQ(embedding_similarity(v, v3).value, 1.0);
  const std::vector<double> x{1.0, 0.0}, y{0.0, 2.0};
  EXPECT_EQ(embedding_similarity(x, y).value, 0.0);
  const std::vector<double> zero{0.0, 0.0};
  const Similarity d = embedding_similarity(x, zero);
  EXPECT_EQ(d.value, 0.0);
  EXPECT_TRUE(d.degenerate);
  EXPECT_FALSE(embedding_similarity(x, y).degenerate);
}

TEST(Similarity, SymmetricAndScaleInvariant) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(16), b(16);
    for (double& v : a) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);
    const double s = embedding_similarity(a, b).value;
    EXPECT_NEAR(s, embedding_similarity(b, a).value, 1e-12);
    EXPECT_NEAR(s, naive_cosine(a, b), 1e-12);
    std::vector<double> scaled = a;
    const double c = rng.uniform(0.01, 100.0);
    for (double& v : scaled) v *= c;
    EXPECT_NEAR(s, embedding_similarity(scaled, b).value, 1e-12);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(TripletLossTest, HingeArithmetic) {
  EXPECT_NEAR(triplet_hinge(0.9, 0.2, 1.0), 0.3, 1e-15);
  EXPECT_EQ(triplet_hinge(0.9, -0.2, 1.0), 0.0);
  EXPECT_EQ(triplet_hinge(1.0, 0.0, 1.0), 0.0);
}

TEST(TripletLossTest, ZeroWhenEveryPairHoldsTheMargin) {
  const std::vector<double> ref{1.0, 0.0};
  const std::vector<std::vector<double>> pos{{2.0, 0.0}, {1.0, 0.01}};
  const std::vector<std::vector<double>> neg{{-1.0, 0.0}, {0.0, -1.0}};
  const TripletLoss l = siamese_triplet_loss(ref, pos, neg, 0.5);
  EXPECT_EQ(l.value, 0.0);
  EXPECT_EQ(l.active_pairs, 0u);
  for (double g : l.grad_reference) EXPECT_EQ(g, 0.0);
}

TEST(TripletLossTest, MatchesDoubleSumAndStaysInRange) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ref(8);
    for (double& v : ref) v = rng.uniform(-1, 1);
    std::vector<std::vector<double>> pos(2, std::vector<double>(8));
    std::vector<std::vector<double>> neg(4, std::vector<double>(8));
    for (auto& p : pos)
      for (double& v : p) v = rng.uniform(-1, 1);
    for (auto& q : neg)
      for (double& v : q) v = rng.uniform(-1, 1);
    double expected = 0.0;
    for (const auto& p : pos) {
      for (const auto& q : neg) {
        expected += std::max(0.0, naive_cosine(ref, q) - naive_cosine(ref, p) + 1.0);
      }
    }
    const TripletLoss l = siamese_triplet_loss(ref, pos, neg, 1.0);
    EXPECT_NEAR(l.value, expected, 1e-12);
    EXPECT_GE(l.value, 0.0);
    EXPECT_LE(l.value, 24.0);
  }
}

TEST(TripletLossTest, InactivePairsSendNoGradient) {
  const std::vector<double> ref{1.0, 0.2, 0.0};
  const std::vector<std::vector<double>> pos{{1.0, 0.1, 0.1}, {0.9, 0.3, -0.1}};
  // The second negative is far below every positive; the first is not.
  const std::vector<std::vector<double>> neg{{0.8, 0.4, 0.2}, {-1.0, 0.0, 0.3}};
  const TripletLoss l = siamese_triplet_loss(ref, pos, neg, 0.5);
  EXPECT_EQ(l.active_pairs, 2u);
  for (double g : l.grad_negatives[1]) EXPECT_EQ(g, 0.0);
  EXPECT_NE(l.grad_negatives[0][0], 0.0);
}

TEST(TripletLossTest, RejectsEmptySets) {
  const std::vector<double> ref{1.0};
  const std::vector<std::vector<double>> one{{1.0}};
  const std::vector<std::vector<double>> none;
  EXPECT_THROW(siamese_triplet_loss(ref, none, one, 1.0), std::invalid_argument);
  EXPECT_THROW(siamese_triplet_loss(ref, one, none, 1.0), std::invalid_argument);
}

class TripletGradients : public ::testing::TestWithParam<int> {};

TEST_P(TripletGradients, MatchesFiniteDifferences) {
  Rng rng(500 + GetParam());
  constexpr std::size_t kDim = 8;
  // Redraw until every hinge is clear of its kink and both branches occur.
  for (int attempt = 0;; ++attempt) {
    ASSERT_LT(attempt, 1000);
    Parameter ref("ref", {kDim});
    std::vector<Parameter> pos, neg;
    for (int i = 0; i < 2; ++i) pos.emplace_back("pos" + std::to_string(i), Shape{kDim});
    for (int i = 0; i < 4; ++i) neg.emplace_back("neg" + std::to_string(i), Shape{kDim});
    std::vector<Parameter*> params{&ref};
    for (auto& p : pos) params.push_back(&p);
    for (auto& q : neg) params.push_back(&q);
    for (Parameter* p : params) p->value = testing::random_tensor(p->value.shape(), rng, -1, 1);
    const double margin = rng.uniform(0.05, 1.0);

    auto as_vectors = [](const std::vector<Parameter>& set) {
      std::vector<std::vector<double>> out;
      for (const auto& p : set) out.emplace_back(p.value.values().begin(), p.value.values().end());
      return out;
    };
    auto ref_vec = [&] {
      return std::vector<double>(ref.value.values().begin(), ref.value.values().end());
    };

    double closest = 1.0;
    std::size_t active = 0;
    const auto r0 = ref_vec();
    for (const auto& p : as_vectors(pos)) {
      for (const auto& q : as_vectors(neg)) {
        const double arg = naive_cosine(r0, q) - naive_cosine(r0, p) + margin;
        closest = std::min(closest, std::abs(arg));
        active += arg > 0;
      }
    }
    if (closest < 1e-3 || active == 0 || active == 8) continue;

    const auto report = testing::finite_difference_check(
        [&] {
          return siamese_triplet_loss(ref_vec(), as_vectors(pos), as_vectors(neg), margin).value;
        },
        [&] {
          const TripletLoss l =
              siamese_triplet_loss(ref_vec(), as_vectors(pos), as_vectors(neg), margin);
          std::copy(l.grad_reference.begin(), l.grad_reference.end(), ref.grad.values().begin());
          for (std::size_t i = 0; i < pos.size(); ++i) {
            std::copy(l.grad_positives[i].begin(), l.grad_positives[i].end(),
                      pos[i].grad.values().begin());
          }
          for (std::size_t i = 0; i < neg.size(); ++i) {
            std::copy(l.grad_negatives[i].begin(), l.grad_negatives[i].end(),
                      neg[i].grad.values().begin());
          }
        },
        params);
    EXPECT_LE(report.max_relative_error, 1e-4) << report.worst;
    return;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, TripletGradients, ::testing::Range(0, 20));

TEST(JointLoss, Examples) {
  const LossBreakdown zero_lambda = joint_loss(2.5, 7.0, 0.0);
  EXPECT_EQ(zero_lambda.l_joint, 2.5);
  const LossBreakdown b = joint_loss(2.0, 3.0, 0.1);
  EXPECT_NEAR(b.l_joint, 2.3, 1e-12);
  EXPECT_EQ(b.lambda, 0.1);
  EXPECT_EQ(b.total(), b.l_joint);
  EXPECT_THROW(joint_loss(1.0, 1.0, -0.1), std::invalid_argument);
}

}  // namespace
}  // namespace wearembed
