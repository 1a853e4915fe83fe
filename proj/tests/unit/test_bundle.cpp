#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <random>

#include "catprobe/bundle.hpp"
#include "catprobe/codec.hpp"
#include "catprobe/errors.hpp"
#include "catprobe/probe.hpp"
#include "support/synth.hpp"

namespace catprobe {
namespace {

using nlohmann::json;

std::string minimal_bundle_json(const std::vector<float>& values, std::size_t subtokens = 2) {
  json subs = json::array();
  for (std::size_t i = 0; i < subtokens; ++i)
    subs.push_back({{"text", "t" + std::to_string(i)}, {"start", i}, {"end", i + 1}, {"special", false}});
  json doc = {{"format_version", 1},
              {"model", "m"},
              {"language", "python"},
              {"num_layers", 1},
              {"num_heads", 1},
              {"samples",
               {{{"id", "s0"},
                 {"content_hash", std::string(64, 'a')},
                 {"subtokens", subs},
                 {"attention_b64", codec::base64_encode(codec::pack_f32le(values))}}}}};
  return doc.dump();
}

TEST(LoadBundle, MinimalWellFormed) {
  const auto b = parse_bundle(minimal_bundle_json({0.6f, 0.4f, 0.3f, 0.7f}));
  ASSERT_EQ(b.samples.size(), 1u);
  const auto& t = b.samples[0].attention;
  EXPECT_EQ(t.seq(), 2u);
  EXPECT_FLOAT_EQ(t.at(0, 0, 0, 0) + t.at(0, 0, 0, 1), 1.0f);
  EXPECT_FLOAT_EQ(t.at(0, 0, 1, 0) + t.at(0, 0, 1, 1), 1.0f);
  EXPECT_TRUE(b.warnings.empty());
}

TEST(LoadBundle, WrongPayloadLengthIsShapeError) {
  EXPECT_THROW(parse_bundle(minimal_bundle_json({0.6f, 0.4f, 0.3f})), ShapeError);
  EXPECT_THROW(parse_bundle(minimal_bundle_json({0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f})), ShapeError);
}

TEST(LoadBundle, OutOfRangeValuesAreRangeErrors) {
  EXPECT_THROW(parse_bundle(minimal_bundle_json({1.5f, -0.5f, 0.3f, 0.7f})), RangeError);
  EXPECT_THROW(parse_bundle(minimal_bundle_json({NAN, 0.4f, 0.3f, 0.7f})), RangeError);
}

TEST(LoadBundle, RowSumDeviationWarnsAndKeeps) {
  const auto b = parse_bundle(minimal_bundle_json({0.5f, 0.4f, 0.3f, 0.7f}));
  ASSERT_EQ(b.samples.size(), 1u);
  ASSERT_EQ(b.warnings.size(), 1u);
  EXPECT_NE(b.warnings[0].find("1 attention rows"), std::string::npos);
}

TEST(LoadBundle, MalformedEnvelopeIsFormatError) {
  EXPECT_THROW(parse_bundle("{not json"), FormatError);
  EXPECT_THROW(parse_bundle("[]"), FormatError);
  auto doc = json::parse(minimal_bundle_json({0.6f, 0.4f, 0.3f, 0.7f}));
  doc["format_version"] = 2;
  EXPECT_THROW(parse_bundle(doc.dump()), FormatError);
  doc["format_version"] = 1;
  doc["samples"][0]["attention_b64"] = "@@@@";
  EXPECT_THROW(parse_bundle(doc.dump()), FormatError);
  doc = json::parse(minimal_bundle_json({0.6f, 0.4f, 0.3f, 0.7f}));
  doc["samples"][0].erase("subtokens");
  EXPECT_THROW(parse_bundle(doc.dump()), FormatError);
  doc = json::parse(minimal_bundle_json({0.6f, 0.4f, 0.3f, 0.7f}));
  doc["samples"][0]["content_hash"] = "xyz";
  EXPECT_THROW(parse_bundle(doc.dump()), FormatError);
  doc = json::parse(minimal_bundle_json({0.6f, 0.4f, 0.3f, 0.7f}));
  doc["language"] = "cobol";
  EXPECT_THROW(parse_bundle(doc.dump()), FormatError);
  doc = json::parse(minimal_bundle_json({0.6f, 0.4f, 0.3f, 0.7f}));
  doc["samples"][0]["subtokens"][0]["end"] = 0;  // non-special with an empty span
  EXPECT_THROW(parse_bundle(doc.dump()), FormatError);
}

TEST(LoadBundle, MissingFileIsFormatError) {
  EXPECT_THROW(load_bundle("/nonexistent/bundle.json"), FormatError);
}

AttentionBundle random_bundle(std::mt19937& rng) {
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  AttentionBundle b;
  b.model = "rand";
  b.language = Language::go;
  b.num_layers = static_cast<std::size_t>(dim(rng));
  b.num_heads = static_cast<std::size_t>(dim(rng));
  b.metadata = {{"checkpoint", "x"}, {"max_len", 256}};
  for (int k = 0; k < 3; ++k) {
    BundleSample s;
    s.id = "r" + std::to_string(k);
    s.content_hash = sha256(s.id);
    const auto seq = static_cast<std::size_t>(dim(rng) + 1);
    s.subtokens.push_back({"<s>", 0, 0, true});
    for (std::size_t i = 1; i < seq; ++i)
      s.subtokens.push_back({"x", static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1), false});
    s.attention = AttentionTensor(b.num_layers, b.num_heads, seq);
    for (std::size_t l = 0; l < b.num_layers; ++l)
      for (std::size_t h = 0; h < b.num_heads; ++h)
        for (std::size_t r = 0; r < seq; ++r) {
          std::vector<float> row(seq);
          float z = 0;
          for (auto& v : row) z += v = u(rng);
          for (std::size_t c = 0; c < seq; ++c) s.attention.at(l, h, r, c) = row[c] / z;
        }
    b.samples.push_back(std::move(s));
  }
  return b;
}

TEST(BundleRoundTrip, TensorBytesPreserved) {
  std::mt19937 rng(7);
  const auto path = std::filesystem::temp_directory_path() / "catprobe_roundtrip.json";
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = random_bundle(rng);
    save_bundle(b, path);
    const auto back = load_bundle(path);
    ASSERT_EQ(back.samples.size(), b.samples.size());
    for (std::size_t k = 0; k < b.samples.size(); ++k) {
      EXPECT_EQ(codec::pack_f32le(back.samples[k].attention.values()), codec::pack_f32le(b.samples[k].attention.values()));
      EXPECT_EQ(back.samples[k].subtokens, b.samples[k].subtokens);
      EXPECT_EQ(back.samples[k].content_hash, b.samples[k].content_hash);
    }
    EXPECT_EQ(back.metadata, b.metadata);
    EXPECT_EQ(serialize_bundle(back), serialize_bundle(b));
  }
  std::filesystem::remove(path);
}

CorpusSample sample_of(Language lang, const std::string& code) {
  return build_sample(make_source_unit("s", lang, code));
}

std::vector<SubtokenSpan> identity_subtokens(const CorpusSample& cs) {
  std::vector<SubtokenSpan> out;
  for (const auto& t : cs.tokens) out.push_back({t.text, t.span.start, t.span.end, false});
  return out;
}

TEST(AlignSubtokens, IdentitySpans) {
  const auto cs = sample_of(Language::python, "x = f(y)");
  const auto al = align_subtokens(identity_subtokens(cs), cs.tokens);
  ASSERT_EQ(al.kept.size(), cs.tokens.size());
  EXPECT_TRUE(al.dropped.empty());
  for (std::size_t i = 0; i < cs.tokens.size(); ++i) {
    EXPECT_EQ(al.token_of[i], i);
    EXPECT_EQ(al.row_of[i], i);
  }
}

TEST(AlignSubtokens, SplitTokenMapsToOneToken) {
  const auto cs = sample_of(Language::python, "tmpbuf.append(x)");
  ASSERT_EQ(cs.tokens[0].text, "tmpbuf");
  std::vector<SubtokenSpan> subs{{"<s>", 0, 0, true}, {"tmp", 0, 3, false}, {"buf", 3, 6, false}};
  for (std::size_t i = 1; i < cs.tokens.size(); ++i)
    subs.push_back({cs.tokens[i].text, cs.tokens[i].span.start, cs.tokens[i].span.end, false});
  const auto al = align_subtokens(subs, cs.tokens);
  EXPECT_EQ(al.token_of[0], std::nullopt);
  EXPECT_EQ(al.token_of[1], 0u);
  EXPECT_EQ(al.token_of[2], 0u);
  EXPECT_EQ(al.kept.size(), cs.tokens.size());
}

TEST(AlignSubtokens, OverlapTiesGoToEarlierToken) {
  const auto cs = sample_of(Language::python, "ab+cd");  // tokens ab | + | cd
  ASSERT_EQ(cs.tokens.size(), 3u);
  // "b+" overlaps "ab" and "+" by one byte each.
  const std::vector<SubtokenSpan> subs{{"a", 0, 1, false}, {"b+", 1, 3, false}, {"cd", 3, 5, false}};
  const auto al = align_subtokens(subs, cs.tokens);
  EXPECT_EQ(al.token_of[1], 0u);
  EXPECT_EQ(al.dropped, std::vector<std::size_t>{1});
  // Whitespace merged into a subtoken still lands on the overlapping token.
  const auto cs2 = sample_of(Language::python, "a = b");
  const std::vector<SubtokenSpan> subs2{{"a", 0, 1, false}, {" =", 1, 3, false}, {" b", 3, 5, false}};
  const auto al2 = align_subtokens(subs2, cs2.tokens);
  EXPECT_EQ(al2.token_of[1], 1u);
  EXPECT_EQ(al2.token_of[2], 2u);
}

TEST(AlignSubtokens, TruncationDropsTrailingTokens) {
  std::string code = "[";
  for (int i = 0; i < 149; ++i) code += "1,";
  code += "]";
  const auto cs = sample_of(Language::python, code);
  ASSERT_EQ(cs.tokens.size(), 300u);
  auto subs = identity_subtokens(cs);
  subs.resize(256);  // max source length
  const auto al = align_subtokens(subs, cs.tokens);
  EXPECT_EQ(al.kept.size(), 256u);
  ASSERT_EQ(al.dropped.size(), 44u);
  EXPECT_EQ(al.dropped.front(), 256u);
  EXPECT_EQ(al.dropped.back(), 299u);
}

TEST(AlignSubtokens, UnmatchedSubtokenIsAlignmentError) {
  const auto cs = sample_of(Language::python, "a  = b");
  const std::vector<SubtokenSpan> subs{{"a", 0, 1, false}, {" ", 1, 2, false}, {"=", 3, 4, false}};
  EXPECT_THROW(align_subtokens(subs, cs.tokens), AlignmentError);
  AlignOptions opt;
  opt.skip_whitespace = true;
  const auto al = align_subtokens(subs, cs.tokens, cs.unit.code, opt);
  EXPECT_EQ(al.token_of[1], std::nullopt);
  const std::vector<SubtokenSpan> beyond{{"zz", 40, 42, false}};
  EXPECT_THROW(align_subtokens(beyond, cs.tokens, cs.unit.code, opt), AlignmentError);
}

Alignment grouping(const std::vector<std::optional<std::size_t>>& token_of, std::size_t tokens) {
  std::vector<LeafToken> leaves;
  std::vector<SubtokenSpan> subs;
  for (std::size_t t = 0; t < tokens; ++t)
    leaves.push_back({t, "t", "x", {static_cast<std::uint32_t>(10 * t), static_cast<std::uint32_t>(10 * t + 10)}, 0});
  // Subtokens of token t take consecutive byte slices within [10t, 10t+10).
  std::vector<std::uint32_t> next(tokens, 0);
  for (const auto& t : token_of) {
    if (!t) {
      subs.push_back({"<s>", 0, 0, true});
      continue;
    }
    const auto start = static_cast<std::uint32_t>(10 * *t) + next[*t]++;
    subs.push_back({"p", start, start + 1, false});
  }
  return align_subtokens(subs, leaves);
}

TEST(AggregateTokenAttention, IdentityAlignmentIsBitExact) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const std::size_t s = 6;
  std::vector<float> block(s * s);
  for (auto& v : block) v = u(rng);
  std::vector<std::optional<std::size_t>> map;
  for (std::size_t i = 0; i < s; ++i) map.push_back(i);
  const auto a = aggregate_token_attention(block, s, grouping(map, s));
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j)
      EXPECT_EQ(std::bit_cast<std::uint32_t>(a(i, j)), std::bit_cast<std::uint32_t>(block[i * s + j]));
}

TEST(AggregateTokenAttention, TwoSubtokensAverageToOneCell) {
  const std::vector<float> block{0.1f, 0.2f, 0.3f, 0.4f};
  const auto a = aggregate_token_attention(block, 2, grouping({0, 0}, 1));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_FLOAT_EQ(a(0, 0), 0.25f);
}

TEST(AggregateTokenAttention, UniformStaysUniformAndSpecialsExcluded) {
  const std::size_t s = 7;
  const std::vector<float> block(s * s, 1.0f / s);
  const auto a = aggregate_token_attention(block, s, grouping({std::nullopt, 0, 0, 1, 2, 2, std::nullopt}, 3));
  ASSERT_EQ(a.size(), 3u);
  for (auto v : a.cells()) EXPECT_FLOAT_EQ(v, 1.0f / s);
}

TEST(AverageHeads, Cases) {
  const AttentionMatrix m(2, {0.3f, 0.7f, 0.2f, 0.8f});
  EXPECT_EQ(average_heads(std::vector{m}), m);
  const std::vector<AttentionMatrix> two{AttentionMatrix(2, {1, 0, 0, 1}), AttentionMatrix(2, {0, 1, 1, 0})};
  EXPECT_EQ(average_heads(two), AttentionMatrix(2, {0.5f, 0.5f, 0.5f, 0.5f}));
  const AttentionMatrix c(3, 0.0831f);
  EXPECT_EQ(average_heads(std::vector<AttentionMatrix>(12, c)), c);
  EXPECT_THROW(average_heads(std::vector<AttentionMatrix>{}), EmptyInput);
  EXPECT_THROW(average_heads(std::vector{AttentionMatrix(2), AttentionMatrix(3)}), ShapeMismatch);
}

struct RandomGrouping {
  std::vector<std::optional<std::size_t>> token_of;
  std::size_t tokens;
};

RandomGrouping random_grouping(std::mt19937& rng) {
  std::uniform_int_distribution<int> count(1, 3);
  std::uniform_int_distribution<int> toks(1, 6);
  RandomGrouping g{{std::nullopt}, static_cast<std::size_t>(toks(rng))};
  for (std::size_t t = 0; t < g.tokens; ++t)
    for (int k = count(rng); k > 0; --k) g.token_of.push_back(t);
  g.token_of.push_back(std::nullopt);
  return g;
}

TEST(AggregationProperties, GlobalMeanPreserved) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = random_grouping(rng);
    const auto al = grouping(g.token_of, g.tokens);
    const auto s = g.token_of.size();
    std::vector<float> block(s * s);
    for (auto& v : block) v = u(rng);
    const auto a = aggregate_token_attention(block, s, al);

    double sub_sum = 0;
    std::size_t sub_cells = 0;
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j)
        if (g.token_of[i] && g.token_of[j]) {
          sub_sum += block[i * s + j];
          ++sub_cells;
        }
    std::vector<double> members(al.kept.size(), 0);
    for (const auto& r : al.row_of)
      if (r) ++members[*r];
    double tok_sum = 0, weight = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j) {
        tok_sum += a(i, j) * members[i] * members[j];
        weight += members[i] * members[j];
      }
    EXPECT_NEAR(tok_sum / weight, sub_sum / static_cast<double>(sub_cells), 1e-6);
  }
}

TEST(AggregationProperties, HeadAveragingCommutesWithAggregation) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = random_grouping(rng);
    const auto al = grouping(g.token_of, g.tokens);
    const auto s = g.token_of.size();
    const std::size_t heads = 1 + static_cast<std::size_t>(trial % 5);
    std::vector<AttentionMatrix> sub_heads, tok_heads;
    for (std::size_t h = 0; h < heads; ++h) {
      AttentionMatrix m(s);
      for (auto& v : m.cells()) v = u(rng);
      tok_heads.push_back(aggregate_token_attention(m.cells(), s, al));
      sub_heads.push_back(std::move(m));
    }
    const auto first = average_heads(tok_heads);
    const auto second = aggregate_token_attention(average_heads(sub_heads).cells(), s, al);
    ASSERT_EQ(first.size(), second.size());
    for (std::size_t c = 0; c < first.cells().size(); ++c) EXPECT_NEAR(first.cells()[c], second.cells()[c], 1e-6);
  }
}

TEST(TokenAttention, ParallelMatchesSerial) {
  const auto cs = sample_of(Language::java, "class A { int f(int x) { return x + 1; } }");
  testing::SynthOptions opt;
  opt.layers = 3;
  opt.heads = 4;
  opt.split = true;
  opt.specials = true;
  const auto bs = testing::synth_sample(
      cs, [](const CorpusSample&, std::size_t l, std::size_t i, std::size_t j) { return 1.0 + l + (i * 7 + j) % 5; }, opt);
  const auto al = align_subtokens(bs.subtokens, cs.tokens);
  const auto par = token_attention(bs, al, "m");
  const auto ser = token_attention_serial(bs, al, "m");
  ASSERT_EQ(par.layers.size(), 3u);
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(par.layers[l], ser.layers[l]);
  EXPECT_EQ(par.size(), cs.tokens.size());
}

}  // namespace
}  // namespace catprobe
