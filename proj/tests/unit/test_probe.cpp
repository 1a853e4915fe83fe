#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "catprobe/errors.hpp"
#include "catprobe/probe.hpp"
#include "support/snippets.hpp"
#include "support/synth.hpp"

namespace catprobe {
namespace {

namespace fs = std::filesystem;

Corpus snippet_corpus(Language lang, std::size_t min_tokens = 5) {
  std::vector<SourceUnit> units;
  int k = 0;
  for (const auto& s : testing::small_snippets())
    if (s.language == lang) units.push_back(make_source_unit("snip" + std::to_string(k++), lang, s.code));
  Corpus c = build_corpus(units);
  std::erase_if(c.samples, [&](const CorpusSample& s) { return s.tokens.size() < min_tokens; });
  return c;
}

std::set<std::string> all_types(const Corpus& c) {
  std::set<std::string> out;
  for (const auto& s : c.samples)
    for (const auto& t : s.tokens) out.insert(t.type_label);
  return out;
}

double near_weight(const CorpusSample& cs, std::size_t, std::size_t i, std::size_t j) {
  return cs.distance(i, j) < distance_threshold(cs.distance) ? 1.0 : 0.0;
}

// One cell per row: the farthest token, lowest index on ties.
double far_weight(const CorpusSample& cs, std::size_t, std::size_t i, std::size_t j) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < cs.distance.size(); ++c)
    if (cs.distance(i, c) > cs.distance(i, best)) best = c;
  return j == best ? 1.0 : 0.0;
}

testing::SynthOptions rich_options() {
  testing::SynthOptions opt;
  opt.layers = 3;
  opt.heads = 2;
  opt.split = true;
  opt.specials = true;
  return opt;
}

TEST(LayerwiseScores, PerfectAlignmentScoresOne) {
  for (auto lang : {Language::go, Language::java, Language::javascript, Language::python}) {
    const auto corpus = snippet_corpus(lang);
    ASSERT_FALSE(corpus.samples.empty());
    const auto bundle = testing::synth_bundle(corpus, "perfect", lang, near_weight, rich_options());
    const ProbeConfig cfg;
    const auto model = prepare_model(corpus, bundle, cfg);
    ASSERT_TRUE(model.skipped.empty()) << model.skipped.front().reason;
    const auto res = layerwise_scores(model, all_types(corpus), cfg);
    ASSERT_EQ(res.per_layer.size(), 3u);
    for (const auto& ls : res.per_layer) {
      EXPECT_EQ(ls.score, 1.0) << to_string(lang) << " layer " << ls.layer;
      EXPECT_GT(ls.counts.union_, 0u);
    }
  }
}

TEST(LayerwiseScores, DisjointAttentionScoresZero) {
  for (auto lang : {Language::go, Language::java, Language::javascript, Language::python}) {
    const auto corpus = snippet_corpus(lang);
    const auto bundle = testing::synth_bundle(corpus, "disjoint", lang, far_weight, rich_options());
    const ProbeConfig cfg;
    const auto model = prepare_model(corpus, bundle, cfg);
    ASSERT_TRUE(model.skipped.empty());
    const auto res = layerwise_scores(model, all_types(corpus), cfg);
    for (const auto& ls : res.per_layer) {
      EXPECT_EQ(ls.score, 0.0) << to_string(lang) << " layer " << ls.layer;
      EXPECT_FALSE(ls.empty_union);
    }
  }
}

double mixed_weight(const CorpusSample& cs, std::size_t layer, std::size_t i, std::size_t j) {
  return 1.0 + static_cast<double>((cs.tokens[i].span.start * 31 + cs.tokens[j].span.end * 7 + layer) % 11);
}

TEST(LayerwiseScores, SingleLayerEqualsPooledSampleCounts) {
  const auto corpus = snippet_corpus(Language::python, 1);
  testing::SynthOptions opt;
  opt.split = true;
  const auto bundle = testing::synth_bundle(corpus, "m", Language::python, mixed_weight, opt);
  ProbeConfig cfg;
  cfg.per_model_cutoff = 4;
  const auto model = prepare_model(corpus, bundle, cfg);
  const auto freq = frequent_types(std::vector{model}, cfg);
  ASSERT_FALSE(freq.ranking.frequent_set.empty());
  const auto res = layerwise_scores(model, freq.ranking.frequent_set, cfg);
  ASSERT_EQ(res.per_layer.size(), 1u);

  // Oracle: filter each sample and pool its counts directly.
  std::vector<PairCounts> counts;
  for (const auto& s : model.samples) {
    try {
      const auto f = filter_matrices(s.attention.layers[0], s.distance, s.types, freq.ranking.frequent_set);
      counts.push_back(sample_counts(f.attention, f.distance, s.theta_a[0], s.theta_d));
    } catch (const EmptySelection&) {
    }
  }
  EXPECT_EQ(res.sample_count, counts.size());
  EXPECT_DOUBLE_EQ(res.per_layer[0].score, corpus_cat_score(counts));
  EXPECT_DOUBLE_EQ(res.headline(), res.per_layer[0].score);
}

TEST(PrepareModel, FailingSampleIsSkippedEverywhere) {
  const auto corpus = snippet_corpus(Language::java);
  testing::SynthOptions opt;
  opt.layers = 2;
  auto bundle = testing::synth_bundle(corpus, "m", Language::java, mixed_weight, opt);
  const ProbeConfig cfg;
  const auto clean = layerwise_scores(prepare_model(corpus, bundle, cfg), all_types(corpus), cfg);

  auto unknown = bundle.samples.front();
  unknown.id = "ghost";
  unknown.content_hash = sha256("not in the corpus");
  auto misaligned = bundle.samples.front();
  misaligned.id = "misaligned";
  misaligned.subtokens.back().start = 4000;
  misaligned.subtokens.back().end = 4001;
  bundle.samples.push_back(unknown);
  bundle.samples.push_back(misaligned);

  const auto model = prepare_model(corpus, bundle, cfg);
  ASSERT_EQ(model.skipped.size(), 2u);
  EXPECT_EQ(model.skipped[0].id, "ghost");
  EXPECT_EQ(model.skipped[1].id, "misaligned");
  const auto res = layerwise_scores(model, all_types(corpus), cfg);
  ASSERT_EQ(res.per_layer.size(), clean.per_layer.size());
  for (std::size_t l = 0; l < res.per_layer.size(); ++l) EXPECT_EQ(res.per_layer[l].counts, clean.per_layer[l].counts);
  EXPECT_EQ(res.sample_count, clean.sample_count);
}

TEST(PrepareModel, LanguageMismatchIsSkipped) {
  const auto corpus = snippet_corpus(Language::go);
  auto bundle = testing::synth_bundle(corpus, "m", Language::go, mixed_weight, {});
  bundle.language = Language::python;
  const auto model = prepare_model(corpus, bundle, {});
  EXPECT_TRUE(model.samples.empty());
  EXPECT_EQ(model.skipped.size(), bundle.samples.size());
}

TEST(PrepareModel, TruncatedTokensLeaveTheDistanceMatrix) {
  const auto corpus = snippet_corpus(Language::python, 8);
  testing::SynthOptions opt;
  opt.max_subtokens = 4;
  const auto bundle = testing::synth_bundle(corpus, "m", Language::python, mixed_weight, opt);
  const auto model = prepare_model(corpus, bundle, {});
  for (const auto& s : model.samples) {
    EXPECT_EQ(s.attention.size(), 4u);
    EXPECT_EQ(s.distance.size(), 4u);
    EXPECT_EQ(s.types.size(), 4u);
    EXPECT_EQ(s.theta_d, distance_threshold(s.distance));
  }
}

TEST(PrepareModel, PerCorpusScopeSharesThresholds) {
  const auto corpus = snippet_corpus(Language::javascript, 1);
  testing::SynthOptions opt;
  opt.layers = 2;
  const auto bundle = testing::synth_bundle(corpus, "m", Language::javascript, mixed_weight, opt);
  ProbeConfig cfg;
  cfg.scope = ThresholdScope::per_corpus;
  const auto model = prepare_model(corpus, bundle, cfg);
  ASSERT_GT(model.samples.size(), 1u);
  std::vector<std::uint32_t> all_d;
  std::vector<float> layer1;
  for (const auto& s : model.samples) {
    all_d.insert(all_d.end(), s.distance.cells().begin(), s.distance.cells().end());
    layer1.insert(layer1.end(), s.attention.layers[1].cells().begin(), s.attention.layers[1].cells().end());
  }
  const auto theta_d = std::max<std::uint32_t>(1, quartile(std::span<const std::uint32_t>(all_d), 0.25));
  const auto theta_a = quartile(std::span<const float>(layer1), 0.75);
  for (const auto& s : model.samples) {
    EXPECT_EQ(s.theta_d, theta_d);
    EXPECT_EQ(s.theta_a[1], theta_a);
  }
}

TEST(SeededSample, DeterministicSortedSubset) {
  const auto a = seeded_sample(100, 10, 7);
  EXPECT_EQ(a, seeded_sample(100, 10, 7));
  EXPECT_EQ(a.size(), 10u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 10u);
  EXPECT_LT(a.back(), 100u);
  EXPECT_NE(a, seeded_sample(100, 10, 8));
  EXPECT_EQ(seeded_sample(5, 9, 0), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(ResolveLayer, NegativeCountsFromTheEnd) {
  EXPECT_EQ(resolve_layer(-1, 12), 11u);
  EXPECT_EQ(resolve_layer(0, 12), 0u);
  EXPECT_THROW(resolve_layer(12, 12), RangeError);
  EXPECT_THROW(resolve_layer(-13, 12), RangeError);
}

class LoadCorpus : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("catprobe_corpus_" + std::to_string(::getpid()));
    fs::create_directories(dir_ / "sub");
    write("a.py", "x = 1\n");
    write("sub/b.py", "def f(y):\n    return y\n");
    write("broken.py", "def (:\n");
    write("c.java", "class C { int x; }\n");
    write("notes.txt", "not code");
  }
  void TearDown() override { fs::remove_all(dir_); }
  void write(const std::string& rel, const std::string& text) { std::ofstream(dir_ / rel) << text; }
  fs::path dir_;
};

TEST_F(LoadCorpus, ByExtension) {
  const auto c = load_corpus(dir_, {});
  ASSERT_EQ(c.samples.size(), 3u);
  EXPECT_EQ(c.samples[0].unit.id, "a.py");
  EXPECT_EQ(c.samples[1].unit.id, "c.java");
  EXPECT_EQ(c.samples[2].unit.id, "sub/b.py");
  ASSERT_EQ(c.rejected.size(), 1u);
  EXPECT_EQ(c.rejected[0].id, "broken.py");
  EXPECT_NE(c.find_id("sub/b.py"), nullptr);
  EXPECT_EQ(c.find(c.samples[1].unit.content_hash), &c.samples[1]);
}

TEST_F(LoadCorpus, ForcedLanguageAndCap) {
  CorpusOptions opt;
  opt.language = Language::python;
  const auto c = load_corpus(dir_, opt);
  EXPECT_EQ(c.samples.size(), 2u);
  opt.max_samples = 1;
  const auto capped = load_corpus(dir_, opt);
  EXPECT_EQ(capped.samples.size() + capped.rejected.size(), 1u);
  const auto again = load_corpus(dir_, opt);
  EXPECT_EQ(again.samples.size(), capped.samples.size());
  if (!capped.samples.empty()) EXPECT_EQ(again.samples[0].unit.id, capped.samples[0].unit.id);
  EXPECT_THROW(load_corpus(dir_ / "missing", {}), Error);
}

}  // namespace
}  // namespace catprobe
