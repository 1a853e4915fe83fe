#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "catprobe/cat_metric.hpp"
#include "catprobe/errors.hpp"
#include "catprobe/type_filter.hpp"
#include "support/oracles.hpp"

namespace catprobe {
namespace {

TEST(SampleCounts, SingleCell) {
  EXPECT_EQ(sample_counts(AttentionMatrix(1, 0.9f), DistanceMatrix(1, 0u), 0.5f, 1), (PairCounts{1, 1}));
  EXPECT_EQ(sample_counts(AttentionMatrix(1, 0.9f), DistanceMatrix(1, 0u), 0.5f, 1, false), (PairCounts{0, 0}));
}

TEST(SampleCounts, NothingAboveThresholds) {
  EXPECT_EQ(sample_counts(AttentionMatrix(2, 0.1f), DistanceMatrix(2, 5u), 0.5f, 1), (PairCounts{0, 0}));
}

TEST(SampleCounts, ThreeByThree) {
  // High attention on (0,0), (0,1), (1,2), (2,2); short distance on (0,0), (1,1), (2,2), (1,2), (2,0).
  const AttentionMatrix a(3, {0.9f, 0.8f, 0.1f, 0.2f, 0.1f, 0.7f, 0.1f, 0.2f, 0.9f});
  const DistanceMatrix d(3, {0, 3, 3, 3, 0, 1, 1, 3, 0});
  const auto c = sample_counts(a, d, 0.5f, 2);
  EXPECT_EQ(c, (PairCounts{3, 6}));
  EXPECT_EQ(c, testing::brute_force_counts(a, d, 0.5f, 2, true));
  // Threshold comparisons are strict on both sides.
  EXPECT_EQ(sample_counts(a, d, 0.9f, 2), (PairCounts{0, 5}));
  EXPECT_EQ(sample_counts(a, d, 0.5f, 0), (PairCounts{0, 4}));
}

TEST(SampleCounts, ThreeSevenths) {
  const AttentionMatrix a(3, {0.9f, 0.9f, 0.9f, 0.1f, 0.9f, 0.1f, 0.1f, 0.1f, 0.9f});
  const DistanceMatrix d(3, {0, 5, 5, 0, 0, 0, 5, 5, 0});
  const auto c = sample_counts(a, d, 0.5f, 1);
  EXPECT_EQ(c, (PairCounts{3, 7}));
  EXPECT_DOUBLE_EQ(cat_score(c), 3.0 / 7.0);
}

TEST(CorpusScore, PooledNotAveraged) {
  const std::vector<PairCounts> samples{{1, 1}, {0, 3}};
  EXPECT_DOUBLE_EQ(corpus_cat_score(samples), 0.25);
  EXPECT_THROW(corpus_cat_score(std::vector<PairCounts>{{0, 0}}), EmptyUnion);
  EXPECT_THROW(cat_score({0, 0}), EmptyUnion);
}

TEST(SampleCounts, Rejections) {
  EXPECT_THROW(sample_counts(AttentionMatrix(2), DistanceMatrix(3), 0.5f, 1), ShapeMismatch);
  EXPECT_THROW(sample_counts(AttentionMatrix(0), DistanceMatrix(0), 0.5f, 1), EmptyInput);
}

struct RandomPair {
  AttentionMatrix a;
  DistanceMatrix d;
  float theta_a;
  std::uint32_t theta_d;
};

RandomPair random_pair(std::mt19937& rng, std::size_t n) {
  std::uniform_int_distribution<int> level(0, 9), dist(0, 6);
  RandomPair p{AttentionMatrix(n), DistanceMatrix(n), 0, 0};
  for (auto& v : p.a.cells()) v = static_cast<float>(level(rng)) / 10.0f;  // coarse grid forces ties
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p.d(i, j) = i == j ? 0u : static_cast<std::uint32_t>(dist(rng));
  p.theta_a = attention_threshold(p.a);
  p.theta_d = distance_threshold(p.d);
  return p;
}

TEST(SampleCounts, MatchesBruteForceOnRandomPairs) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_pair(rng, 5);
    for (bool diag : {true, false})
      ASSERT_EQ(sample_counts(p.a, p.d, p.theta_a, p.theta_d, diag),
                testing::brute_force_counts(p.a, p.d, p.theta_a, p.theta_d, diag));
  }
}

TEST(SampleCounts, PermutationInvariant) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 8);
    const auto p = random_pair(rng, n);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    AttentionMatrix pa(n);
    DistanceMatrix pd(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        pa(i, j) = p.a(perm[i], perm[j]);
        pd(i, j) = p.d(perm[i], perm[j]);
      }
    EXPECT_EQ(attention_threshold(pa), p.theta_a);
    EXPECT_EQ(distance_threshold(pd), p.theta_d);
    EXPECT_EQ(sample_counts(pa, pd, p.theta_a, p.theta_d), sample_counts(p.a, p.d, p.theta_a, p.theta_d));
  }
}

TEST(SampleCounts, InvariantUnderMonotoneAttentionRescaling) {
  // Thresholds are quantiles, so a strictly increasing map of A moves theta_a with the data.
  std::mt19937 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_pair(rng, 6);
    AttentionMatrix scaled(6);
    for (std::size_t c = 0; c < 36; ++c) scaled.cells()[c] = p.a.cells()[c] * p.a.cells()[c] * 0.5f;
    EXPECT_EQ(sample_counts(scaled, p.d, attention_threshold(scaled), p.theta_d),
              sample_counts(p.a, p.d, p.theta_a, p.theta_d));
  }
}

TEST(SampleCounts, MonotoneInThresholds) {
  std::mt19937 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_pair(rng, 6);
    const auto base = sample_counts(p.a, p.d, p.theta_a, p.theta_d);
    const auto looser_d = sample_counts(p.a, p.d, p.theta_a, p.theta_d + 1);
    const auto stricter_a = sample_counts(p.a, p.d, p.theta_a + 0.1f, p.theta_d);
    EXPECT_GE(looser_d.matched, base.matched);
    EXPECT_GE(looser_d.union_, base.union_);
    EXPECT_LE(stricter_a.matched, base.matched);
    EXPECT_LE(stricter_a.union_, base.union_);
    EXPECT_LE(base.matched, base.union_);
  }
}

TEST(CorpusCounts, ParallelMatchesSerialAndSum) {
  std::mt19937 rng(2);
  std::vector<RandomPair> pairs;
  for (int k = 0; k < 300; ++k) pairs.push_back(random_pair(rng, 1 + static_cast<std::size_t>(k % 20)));
  std::vector<ScoredPair> in;
  PairCounts summed;
  for (const auto& p : pairs) {
    in.push_back({&p.a, &p.d, p.theta_a, p.theta_d});
    summed += sample_counts(p.a, p.d, p.theta_a, p.theta_d);
  }
  EXPECT_EQ(corpus_counts(in), summed);
  EXPECT_EQ(corpus_counts(in), corpus_counts_serial(in));
  EXPECT_EQ(corpus_counts(in, false), corpus_counts_serial(in, false));

  const DistanceMatrix wrong(3);
  in.push_back({&pairs[0].a, &wrong, 0.5f, 1});
  EXPECT_THROW(corpus_counts(in), ShapeMismatch);
}

}  // namespace
}  // namespace catprobe
