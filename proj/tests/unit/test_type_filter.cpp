#include <gtest/gtest.h>

#include <random>

#include "catprobe/errors.hpp"
#include "catprobe/probe.hpp"
#include "catprobe/type_filter.hpp"
#include "support/snippets.hpp"

namespace catprobe {
namespace {

using Conf = std::map<std::string, TypeConfidence>;

TEST(Quartile, NearestRank) {
  const std::vector<int> v{3, 8, 1, 5, 2, 7, 4, 6};
  EXPECT_EQ(quartile(std::span<const int>(v), 0.75), 6);
  EXPECT_EQ(quartile(std::span<const int>(v), 0.25), 2);
  const std::vector<float> constant(9, 0.25f);
  EXPECT_EQ(quartile(std::span<const float>(constant), 0.75), 0.25f);
  const std::vector<int> one{42};
  EXPECT_EQ(quartile(std::span<const int>(one), 0.75), 42);
  EXPECT_EQ(quartile(std::span<const int>(one), 0.25), 42);
  const std::vector<int> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_EQ(quartile(std::span<const int>(ten), 0.3), 3);  // 0.3 * 10 must not round up to rank 4
}

TEST(Quartile, Rejections) {
  EXPECT_THROW(quartile(std::span<const int>(), 0.75), EmptyInput);
  const std::vector<int> v{1, 2};
  EXPECT_THROW(quartile(std::span<const int>(v), 0.0), RangeError);
  EXPECT_THROW(quartile(std::span<const int>(v), 1.0), RangeError);
}

TEST(Quartile, RankProperty) {
  std::mt19937 rng(1);
  std::uniform_int_distribution<int> len(1, 60), val(0, 9);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> v(static_cast<std::size_t>(len(rng)));
    for (auto& x : v) x = val(rng);
    for (double q : {0.25, 0.5, 0.75}) {
      const int r = quartile(std::span<const int>(v), q);
      const auto need = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()) - 1e-9));
      const auto at_most = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](int x) { return x <= r; }));
      const auto below = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](int x) { return x < r; }));
      EXPECT_GE(at_most, std::max<std::size_t>(need, 1));
      EXPECT_LT(below, std::max<std::size_t>(need, 1));
    }
  }
}

TEST(Thresholds, Defaults) {
  EXPECT_EQ(kAttentionQuantile, 0.75);
  EXPECT_EQ(kDistanceQuantile, 0.25);
  const AttentionMatrix a(2, {0.1f, 0.2f, 0.3f, 0.4f});
  EXPECT_EQ(attention_threshold(a), 0.3f);
}

TEST(Thresholds, DistanceThresholdAtLeastOne) {
  EXPECT_EQ(distance_threshold(DistanceMatrix(1, 0u)), 1u);
  for (const auto& snip : testing::small_snippets()) {
    const auto cs = build_sample(make_source_unit("s", snip.language, snip.code));
    const auto t = distance_threshold(cs.distance);
    EXPECT_GE(t, 1u);
    EXPECT_EQ(t, std::max<std::uint32_t>(1, quartile(cs.distance.cells(), 0.25)));
  }
}

TEST(TypeConfidence, SimpleCases) {
  const std::vector<std::string> types{"A", "B", "C"};
  const AttentionMatrix a(3, {0.9f, 0.1f, 0.6f, 0.8f, 0.2f, 0.1f, 0.7f, 0.6f, 0.0f});
  EXPECT_DOUBLE_EQ(type_confidence(a, types, 0.5f, "A"), 1.0);
  EXPECT_DOUBLE_EQ(type_confidence(a, types, 0.95f, "A"), 0.0);
  EXPECT_DOUBLE_EQ(type_confidence(a, types, 0.5f, "B"), 1.0 / 3.0);
  EXPECT_THROW(type_confidence(a, types, 0.5f, "Z"), TypeAbsent);
  // Strictly greater than the threshold.
  EXPECT_DOUBLE_EQ(type_confidence(a, types, 0.9f, "A"), 0.0);
}

TEST(TypeConfidence, RowAndEitherSemantics) {
  const std::vector<std::string> types{"A", "B", "C"};
  const AttentionMatrix a(3, {0.9f, 0.1f, 0.6f, 0.8f, 0.2f, 0.1f, 0.7f, 0.6f, 0.0f});
  EXPECT_DOUBLE_EQ(type_confidence(a, types, 0.5f, "A", MaskSemantics::row), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(type_confidence(a, types, 0.5f, "A", MaskSemantics::either), 4.0 / 5.0);
  EXPECT_DOUBLE_EQ(type_confidence(a, types, 0.5f, "C", MaskSemantics::row), 2.0 / 3.0);
}

// Two models, two samples each, types A/B/C, theta_a = 0.5 everywhere.
struct Fixture {
  std::vector<std::string> t1{"A", "B", "C"};
  std::vector<std::string> t2{"A", "A", "B"};
  AttentionMatrix m1s1{3, {0.9f, 0.1f, 0.6f, 0.8f, 0.2f, 0.1f, 0.7f, 0.6f, 0.0f}};
  AttentionMatrix m1s2{3, {0.6f, 0.1f, 0.9f, 0.2f, 0.3f, 0.8f, 0.1f, 0.1f, 0.1f}};
  AttentionMatrix m2s1{3, {0.1f, 0.9f, 0.9f, 0.1f, 0.9f, 0.1f, 0.9f, 0.9f, 0.1f}};
  AttentionMatrix m2s2{3, {0.1f, 0.1f, 0.9f, 0.1f, 0.6f, 0.9f, 0.1f, 0.1f, 0.1f}};

  std::vector<Conf> confidences() const {
    const std::vector<ConfidenceSample> a{{&m1s1, t1, 0.5f}, {&m1s2, t2, 0.5f}};
    const std::vector<ConfidenceSample> b{{&m2s1, t1, 0.5f}, {&m2s2, t2, 0.5f}};
    return {model_confidences("m1", a), model_confidences("m2", b)};
  }
};

TEST(Algorithm, HandFixtureConfidencesAndRanks) {
  const auto conf = Fixture{}.confidences();
  EXPECT_NEAR(conf[0].at("A").confidence, 7.0 / 12.0, 1e-12);
  EXPECT_NEAR(conf[0].at("B").confidence, 0.5, 1e-12);
  EXPECT_NEAR(conf[0].at("C").confidence, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(conf[1].at("A").confidence, 0.25, 1e-12);
  EXPECT_NEAR(conf[1].at("B").confidence, 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(conf[1].at("C").confidence, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(conf[0].at("A").sample_count, 2u);
  EXPECT_EQ(conf[0].at("C").sample_count, 1u);

  const auto r = rank_types(conf, 2);
  EXPECT_EQ(r.ranks.at("m1"), (std::map<std::string, int>{{"A", 1}, {"B", 2}, {"C", 3}}));
  EXPECT_EQ(r.ranks.at("m2"), (std::map<std::string, int>{{"A", 3}, {"B", 1}, {"C", 2}}));
  EXPECT_EQ(r.rank_sum, (std::map<std::string, int>{{"A", 4}, {"B", 3}, {"C", 5}}));
  EXPECT_EQ(r.cutoff, 4);
  // A sits exactly on the cutoff and is excluded.
  EXPECT_EQ(r.frequent_set, (std::set<std::string>{"B"}));
  EXPECT_EQ(r.ordered_types(), (std::vector<std::string>{"B", "A", "C"}));
  EXPECT_TRUE(r.warnings.empty());

  const auto wide = rank_types(conf, 3);
  EXPECT_EQ(wide.cutoff, 6);
  EXPECT_EQ(wide.frequent_set, (std::set<std::string>{"A", "B", "C"}));
}

Conf conf_of(const std::string& model, const std::vector<std::pair<std::string, double>>& v) {
  Conf out;
  for (const auto& [t, c] : v) out[t] = {model, t, c, 1};
  return out;
}

TEST(RankTypes, SingleModelKeepsTopRanks) {
  const std::vector<Conf> one{conf_of("m", {{"x", 0.2}, {"y", 0.9}, {"z", 0.5}})};
  const auto r = rank_types(one, 2);
  EXPECT_EQ(r.frequent_set, (std::set<std::string>{"y"}));
}

TEST(RankTypes, IdenticalRankingsKeepTopKMinusOne) {
  const auto base = std::vector<std::pair<std::string, double>>{{"a", 0.9}, {"b", 0.7}, {"c", 0.5}, {"d", 0.3}, {"e", 0.1}};
  for (int k = 1; k <= 5; ++k) {
    std::vector<Conf> models;
    for (int m = 0; m < 4; ++m) models.push_back(conf_of("m" + std::to_string(m), base));
    const auto r = rank_types(models, k);
    EXPECT_EQ(r.frequent_set.size(), static_cast<std::size_t>(k - 1));
  }
}

TEST(RankTypes, DefaultCutoffForFourModels) {
  std::vector<Conf> models;
  for (int m = 0; m < 4; ++m) models.push_back(conf_of("m" + std::to_string(m), {{"a", 0.5}}));
  EXPECT_EQ(rank_types(models).cutoff, 40);
  EXPECT_EQ(rank_types(models).per_model_cutoff, 10);
}

TEST(RankTypes, TiesBreakLexicographically) {
  const std::vector<Conf> one{conf_of("m", {{"b", 0.5}, {"a", 0.5}, {"c", 0.5}})};
  const auto r = rank_types(one, 10);
  EXPECT_EQ(r.ranks.at("m"), (std::map<std::string, int>{{"a", 1}, {"b", 2}, {"c", 3}}));
}

TEST(RankTypes, DisagreeingTypeSetsAreIntersected) {
  const std::vector<Conf> models{conf_of("m1", {{"a", 0.1}, {"b", 0.2}, {"c", 0.9}}), conf_of("m2", {{"a", 0.3}, {"b", 0.2}})};
  const auto r = rank_types(models, 10);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.rank_sum.size(), 2u);
  EXPECT_EQ(r.rank_sum.count("c"), 0u);
  EXPECT_EQ(r.ranks.at("m1").at("b"), 1);
  EXPECT_THROW(rank_types(std::vector<Conf>{}), EmptyInput);
}

TEST(RankTypes, FrequentSetGrowsWithCutoff) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Conf> models;
    for (int m = 0; m < 3; ++m) {
      std::vector<std::pair<std::string, double>> v;
      for (char t = 'a'; t < 'a' + 8; ++t) v.push_back({std::string(1, t), u(rng)});
      models.push_back(conf_of("m" + std::to_string(m), v));
    }
    std::set<std::string> prev;
    for (int c = 1; c <= 9; ++c) {
      const auto cur = rank_types(models, c).frequent_set;
      EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = cur;
    }
    EXPECT_EQ(prev.size(), 8u);
  }
}

TEST(FilterMatrices, KeepsFrequentRowsAndColumns) {
  const std::vector<std::string> types{"A", "B", "A"};
  const AttentionMatrix a(3, {0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f, 0.7f, 0.8f, 0.9f});
  const DistanceMatrix d(3, {0, 1, 2, 1, 0, 1, 2, 1, 0});
  const auto f = filter_matrices(a, d, types, {"A"});
  EXPECT_EQ(f.kept, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(f.attention, AttentionMatrix(2, {0.1f, 0.3f, 0.7f, 0.9f}));
  EXPECT_EQ(f.distance, DistanceMatrix(2, {0, 2, 2, 0}));

  const auto all = filter_matrices(a, d, types, {"A", "B"});
  EXPECT_EQ(all.attention, a);
  EXPECT_EQ(all.distance, d);

  EXPECT_THROW(filter_matrices(a, d, types, {"Z"}), EmptySelection);
  EXPECT_THROW(filter_matrices(a, DistanceMatrix(2), types, {"A"}), ShapeMismatch);
}

TEST(FilterMatrices, Idempotent) {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const std::vector<std::string> labels{"p", "q", "r", "s"};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 7);
    std::vector<std::string> types(n);
    for (auto& t : types) t = labels[static_cast<std::size_t>(pick(rng))];
    AttentionMatrix a(n);
    DistanceMatrix d(n);
    for (auto& v : a.cells()) v = u(rng);
    for (auto& v : d.cells()) v = static_cast<std::uint32_t>(pick(rng));
    const std::set<std::string> keep{types[0], labels[static_cast<std::size_t>(pick(rng))]};
    const auto once = filter_matrices(a, d, types, keep);
    std::vector<std::string> kept_types;
    for (auto i : once.kept) kept_types.push_back(types[i]);
    const auto twice = filter_matrices(once.attention, once.distance, kept_types, keep);
    EXPECT_EQ(twice.attention, once.attention);
    EXPECT_EQ(twice.distance, once.distance);
  }
}

TEST(ModelConfidences, ParallelMatchesSerial) {
  std::mt19937 rng(21);
  std::uniform_int_distribution<int> pick(0, 5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<AttentionMatrix> mats;
  std::vector<std::vector<std::string>> types;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 1 + static_cast<std::size_t>(k % 13);
    AttentionMatrix a(n);
    for (auto& v : a.cells()) v = u(rng);
    std::vector<std::string> t(n);
    for (auto& x : t) x = "t" + std::to_string(pick(rng));
    mats.push_back(std::move(a));
    types.push_back(std::move(t));
  }
  std::vector<ConfidenceSample> samples;
  for (std::size_t k = 0; k < mats.size(); ++k) samples.push_back({&mats[k], types[k], attention_threshold(mats[k])});
  for (auto sem : {MaskSemantics::column, MaskSemantics::row, MaskSemantics::either}) {
    const auto par = model_confidences("m", samples, sem);
    const auto ser = model_confidences_serial("m", samples, sem);
    ASSERT_EQ(par.size(), ser.size());
    for (const auto& [t, c] : ser) {
      EXPECT_EQ(par.at(t).confidence, c.confidence);
      EXPECT_EQ(par.at(t).sample_count, c.sample_count);
    }
  }
}

}  // namespace
}  // namespace catprobe
