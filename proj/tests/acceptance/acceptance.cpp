// Acceptance checks, one line per criterion. Exit status is the number of
// failed checks.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "catprobe/bundle.hpp"
#include "catprobe/cat_metric.hpp"
#include "catprobe/codec.hpp"
#include "catprobe/distance.hpp"
#include "catprobe/errors.hpp"
#include "catprobe/probe.hpp"
#include "catprobe/type_filter.hpp"
#include "support/oracles.hpp"
#include "support/snippets.hpp"
#include "support/synth.hpp"

namespace {

using namespace catprobe;
using nlohmann::json;

// Returns an empty string on success, otherwise what went wrong.
using Check = std::function<std::string()>;

int failures = 0;

void run(const char* name, const Check& check) {
  std::string detail;
  try {
    detail = check();
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  if (detail.empty()) {
    std::printf("PASS  %s\n", name);
  } else {
    std::printf("FAIL  %s: %s\n", name, detail.c_str());
    ++failures;
  }
}

std::string distance_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::map<Language, int> per_language;
  int count = 0;
  for (const auto& s : testing::small_snippets()) {
    const auto unit = make_source_unit("snippet", s.language, s.code);
    const auto uast = parse_source(unit);
    if (uast.leaf_count() > 12) return "snippet with " + std::to_string(uast.leaf_count()) + " leaves";
    const auto d = distance_matrix(uast);
    const auto fw = testing::floyd_warshall_leaves(uast);
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = 0; j < d.size(); ++j)
        if (d(i, j) != fw[i][j]) return "mismatch in a " + std::string(to_string(s.language)) + " snippet";
    ++per_language[s.language];
    ++count;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (count < 50) return "only " + std::to_string(count) + " snippets";
  if (per_language.size() != 4) return "not all four languages covered";
  if (secs >= 10.0) return "took " + std::to_string(secs) + " s";
  std::printf("      %d snippets, %.3f s\n", count, secs);
  return {};
}

std::string counts_oracle() {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> level(0, 9), dist(0, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    AttentionMatrix a(5);
    DistanceMatrix d(5);
    for (auto& v : a.cells()) v = static_cast<float>(level(rng)) / 10.0f;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) d(i, j) = i == j ? 0u : static_cast<std::uint32_t>(dist(rng));
    const float ta = attention_threshold(a);
    const auto td = distance_threshold(d);
    for (bool diag : {true, false})
      if (!(sample_counts(a, d, ta, td, diag) == testing::brute_force_counts(a, d, ta, td, diag)))
        return "trial " + std::to_string(trial) + " disagrees with brute force";
  }
  const std::vector<PairCounts> pooled{{1, 1}, {0, 3}};
  if (corpus_cat_score(pooled) != 0.25) return "(1,1)+(0,3) did not give 1/4";
  return {};
}

Corpus corpus_of(Language lang) {
  std::vector<SourceUnit> units;
  int k = 0;
  for (const auto& s : testing::small_snippets())
    if (s.language == lang) units.push_back(make_source_unit("s" + std::to_string(k++), lang, s.code));
  auto c = build_corpus(units);
  // Below five tokens the near set can exceed a quarter of the cells.
  std::erase_if(c.samples, [](const CorpusSample& s) { return s.tokens.size() < 5; });
  return c;
}

std::set<std::string> types_of(const Corpus& c) {
  std::set<std::string> out;
  for (const auto& s : c.samples)
    for (const auto& t : s.tokens) out.insert(t.type_label);
  return out;
}

std::string alignment_extremes() {
  const testing::TokenWeight near = [](const CorpusSample& cs, std::size_t, std::size_t i, std::size_t j) {
    return cs.distance(i, j) < distance_threshold(cs.distance) ? 1.0 : 0.0;
  };
  const testing::TokenWeight far = [](const CorpusSample& cs, std::size_t, std::size_t i, std::size_t j) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cs.distance.size(); ++c)
      if (cs.distance(i, c) > cs.distance(i, best)) best = c;
    return j == best ? 1.0 : 0.0;
  };
  testing::SynthOptions opt;
  opt.layers = 4;
  opt.heads = 3;
  opt.split = true;
  opt.specials = true;
  const ProbeConfig cfg;
  for (auto lang : {Language::go, Language::java, Language::javascript, Language::python}) {
    const auto corpus = corpus_of(lang);
    const auto freq = types_of(corpus);
    for (const auto& [weight, expected] : {std::pair{near, 1.0}, std::pair{far, 0.0}}) {
      const auto model = prepare_model(corpus, testing::synth_bundle(corpus, "synthetic", lang, weight, opt), cfg);
      if (!model.skipped.empty()) return "sample skipped: " + model.skipped.front().reason;
      const auto res = layerwise_scores(model, freq, cfg);
      if (res.per_layer.size() != opt.layers) return "wrong layer count";
      for (const auto& ls : res.per_layer)
        if (ls.score != expected || ls.empty_union) {
          std::ostringstream os;
          os << to_string(lang) << " layer " << ls.layer << " scored " << ls.score << ", expected " << expected;
          return os.str();
        }
    }
  }
  return {};
}

std::string quartiles() {
  const std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  if (quartile(std::span<const int>(v), 0.75) != 6) return "1..8 at 0.75 is not 6";
  if (quartile(std::span<const int>(v), 0.25) != 2) return "1..8 at 0.25 is not 2";
  if (kAttentionQuantile != 0.75 || kDistanceQuantile != 0.25) return "default quantiles changed";
  // theta_a is the third quartile of A's cells, theta_d the first quartile of D's.
  AttentionMatrix a(3);
  DistanceMatrix d(3);
  for (std::size_t c = 0; c < 9; ++c) {
    a.cells()[c] = static_cast<float>(c) / 10.0f;
    d.cells()[c] = static_cast<std::uint32_t>(8 - c);
  }
  if (attention_threshold(a) != 0.6f) return "theta_a of 0..0.8 is not the 7th value";
  if (distance_threshold(d) != 2) return "theta_d of 0..8 is not the 3rd value";
  if (distance_threshold(DistanceMatrix(2, 0u)) != 1) return "theta_d floor";
  return {};
}

std::string aggregation_identities() {
  const auto cs = build_sample(make_source_unit("id", Language::java, "class A { int f(int x) { return x * 2; } }"));
  std::vector<SubtokenSpan> subs;
  for (const auto& t : cs.tokens) subs.push_back({t.text, t.span.start, t.span.end, false});
  const auto al = align_subtokens(subs, cs.tokens);
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const auto s = subs.size();
  std::vector<float> block(s * s);
  for (auto& v : block) v = u(rng);
  const auto tok = aggregate_token_attention(block, s, al);
  if (codec::pack_f32le(tok.cells()) != codec::pack_f32le(block)) return "one-to-one aggregation changed bits";

  AttentionMatrix m(s);
  std::copy(block.begin(), block.end(), m.cells().begin());
  for (std::size_t h : {1u, 2u, 7u, 12u, 16u})
    if (!(average_heads(std::vector<AttentionMatrix>(h, m)) == m))
      return "averaging " + std::to_string(h) + " identical heads is not the identity";

  // Global mean over non-special subtoken cells equals the subtoken-count
  // weighted mean of token cells.
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<SubtokenSpan> split{{"<s>", 0, 0, true}};
    std::vector<double> members(cs.tokens.size(), 0);
    for (const auto& t : cs.tokens) {
      std::uint32_t at = t.span.start;
      const auto pieces = std::min<std::uint32_t>(1 + rng() % 3, t.span.size());
      for (std::uint32_t p = 0; p < pieces; ++p) {
        const auto end = p + 1 == pieces ? t.span.end : at + 1;
        split.push_back({"p", at, end, false});
        at = end;
        ++members[t.index];
      }
    }
    split.push_back({"</s>", 0, 0, true});
    const auto sa = align_subtokens(split, cs.tokens);
    const auto n = split.size();
    std::vector<float> sb(n * n);
    for (auto& v : sb) v = u(rng);
    const auto ta = aggregate_token_attention(sb, n, sa);
    double sub = 0, cells = 0;
    for (std::size_t i = 1; i + 1 < n; ++i)
      for (std::size_t j = 1; j + 1 < n; ++j) sub += sb[i * n + j], ++cells;
    double tk = 0, w = 0;
    for (std::size_t i = 0; i < ta.size(); ++i)
      for (std::size_t j = 0; j < ta.size(); ++j) tk += ta(i, j) * members[i] * members[j], w += members[i] * members[j];
    if (std::abs(sub / cells - tk / w) > 1e-6) return "global mean drifted by " + std::to_string(sub / cells - tk / w);
  }
  return {};
}

std::string algorithm_fixture() {
  const std::vector<std::string> t1{"A", "B", "C"}, t2{"A", "A", "B"};
  const AttentionMatrix m1s1(3, {0.9f, 0.1f, 0.6f, 0.8f, 0.2f, 0.1f, 0.7f, 0.6f, 0.0f});
  const AttentionMatrix m1s2(3, {0.6f, 0.1f, 0.9f, 0.2f, 0.3f, 0.8f, 0.1f, 0.1f, 0.1f});
  const AttentionMatrix m2s1(3, {0.1f, 0.9f, 0.9f, 0.1f, 0.9f, 0.1f, 0.9f, 0.9f, 0.1f});
  const AttentionMatrix m2s2(3, {0.1f, 0.1f, 0.9f, 0.1f, 0.6f, 0.9f, 0.1f, 0.1f, 0.1f});
  const std::vector<ConfidenceSample> a{{&m1s1, t1, 0.5f}, {&m1s2, t2, 0.5f}};
  const std::vector<ConfidenceSample> b{{&m2s1, t1, 0.5f}, {&m2s2, t2, 0.5f}};
  const std::vector<std::map<std::string, TypeConfidence>> conf{model_confidences("m1", a), model_confidences("m2", b)};

  const std::map<std::string, double> want1{{"A", 7.0 / 12.0}, {"B", 0.5}, {"C", 1.0 / 3.0}};
  const std::map<std::string, double> want2{{"A", 0.25}, {"B", 5.0 / 6.0}, {"C", 1.0 / 3.0}};
  for (const auto& [t, c] : want1)
    if (std::abs(conf[0].at(t).confidence - c) > 1e-12) return "m1 confidence of " + t;
  for (const auto& [t, c] : want2)
    if (std::abs(conf[1].at(t).confidence - c) > 1e-12) return "m2 confidence of " + t;

  const auto r = rank_types(conf, 2);
  if (r.ranks.at("m1") != std::map<std::string, int>{{"A", 1}, {"B", 2}, {"C", 3}}) return "m1 ranks";
  if (r.ranks.at("m2") != std::map<std::string, int>{{"A", 3}, {"B", 1}, {"C", 2}}) return "m2 ranks";
  if (r.rank_sum != std::map<std::string, int>{{"A", 4}, {"B", 3}, {"C", 5}}) return "rank sums";
  if (r.cutoff != 4) return "cutoff is not 2 x 2";
  if (r.frequent_set != std::set<std::string>{"B"}) return "rank_sum == cutoff was kept";
  if (rank_types(conf, 3).frequent_set != std::set<std::string>{"A", "B", "C"}) return "cutoff 6 set";
  return {};
}

std::string expect_throw(const std::string& text, const char* what, const std::function<void(const std::string&)>& f) {
  try {
    f(text);
  } catch (const FormatError&) {
    return std::string(what) == "FormatError" ? "" : std::string("FormatError instead of ") + what;
  } catch (const ShapeError&) {
    return std::string(what) == "ShapeError" ? "" : std::string("ShapeError instead of ") + what;
  } catch (const RangeError&) {
    return std::string(what) == "RangeError" ? "" : std::string("RangeError instead of ") + what;
  }
  return std::string("no ") + what;
}

std::string bundle_round_trip() {
  const auto corpus = corpus_of(Language::go);
  testing::SynthOptions opt;
  opt.layers = 3;
  opt.heads = 4;
  opt.split = true;
  opt.specials = true;
  auto bundle = testing::synth_bundle(
      corpus, "rt", Language::go,
      [](const CorpusSample&, std::size_t l, std::size_t i, std::size_t j) { return 1.0 / (1.0 + l + i * 3 + j); }, opt);
  bundle.metadata["max_len"] = 256;
  const auto path = std::filesystem::temp_directory_path() / "catprobe_acceptance_bundle.json";
  save_bundle(bundle, path);
  const auto back = load_bundle(path);
  std::filesystem::remove(path);
  if (back.samples.size() != bundle.samples.size()) return "sample count changed";
  for (std::size_t k = 0; k < back.samples.size(); ++k) {
    if (codec::pack_f32le(back.samples[k].attention.values()) != codec::pack_f32le(bundle.samples[k].attention.values()))
      return "tensor bytes changed";
    if (back.samples[k].subtokens != bundle.samples[k].subtokens) return "subtokens changed";
  }
  if (back.metadata != bundle.metadata) return "metadata changed";

  const auto make = [](const std::vector<float>& values) {
    return json{{"format_version", 1},
                {"model", "m"},
                {"language", "go"},
                {"num_layers", 1},
                {"num_heads", 1},
                {"samples",
                 {{{"id", "x"},
                   {"content_hash", std::string(64, '0')},
                   {"subtokens", {{{"text", "a"}, {"start", 0}, {"end", 1}, {"special", false}}}},
                   {"attention_b64", codec::base64_encode(codec::pack_f32le(values))}}}}};
  };
  const auto parse = [](const std::string& t) { parse_bundle(t); };
  auto doc = make({1.0f});
  if (parse_bundle(doc.dump()).samples.size() != 1) return "minimal bundle rejected";
  if (auto e = expect_throw(make({0.5f, 0.5f}).dump(), "ShapeError", parse); !e.empty()) return e;
  if (auto e = expect_throw(make({1.5f}).dump(), "RangeError", parse); !e.empty()) return e;
  if (auto e = expect_throw(make({NAN}).dump(), "RangeError", parse); !e.empty()) return e;
  if (auto e = expect_throw("{\"format_version\": 1", "FormatError", parse); !e.empty()) return e;
  doc["format_version"] = 3;
  if (auto e = expect_throw(doc.dump(), "FormatError", parse); !e.empty()) return e;
  doc = make({1.0f});
  doc["samples"][0]["attention_b64"] = "!!";
  if (auto e = expect_throw(doc.dump(), "FormatError", parse); !e.empty()) return e;
  if (parse_bundle(make({0.5f}).dump()).warnings.empty()) return "row-sum deviation not reported";
  return {};
}

std::string buffer_filtering() {
  const auto cs = build_sample(make_source_unit("buffer", Language::python, testing::kBufferSnippet));
  std::vector<std::string> types;
  for (const auto& t : cs.tokens) types.push_back(t.type_label);
  const std::set<std::string> universe(types.begin(), types.end());
  if (std::count(types.begin(), types.end(), ".") != 1) return "snippet should hold exactly one '.'";

  // One model; "." gets the lowest confidence, every other type a distinct higher one.
  std::map<std::string, TypeConfidence> conf;
  double c = 1.0;
  for (const auto& t : universe) {
    conf[t] = {"synthetic", t, t == "." ? 0.0 : c, 1};
    c -= 0.01;
  }
  const auto r = rank_types(std::vector{conf}, static_cast<int>(universe.size()));
  if (r.frequent_set.contains(".")) return "'.' survived the cutoff";
  if (r.frequent_set.size() != universe.size() - 1) return "other types were dropped";

  AttentionMatrix a(cs.tokens.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) a(i, j) = static_cast<float>(i * a.size() + j);
  const auto f = filter_matrices(a, cs.distance, types, r.frequent_set);
  const auto dot = static_cast<std::size_t>(std::find(types.begin(), types.end(), ".") - types.begin());
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < types.size(); ++i)
    if (i != dot) expected.push_back(i);
  if (f.kept != expected) return "kept rows are not all-but-'.'";
  for (std::size_t i = 0; i < expected.size(); ++i)
    for (std::size_t j = 0; j < expected.size(); ++j)
      if (f.attention(i, j) != a(expected[i], expected[j]) || f.distance(i, j) != cs.distance(expected[i], expected[j]))
        return "filtered cell does not match the source cell";
  return {};
}

}  // namespace

int main() {
  run("distance: BFS equals Floyd-Warshall on >= 50 snippets in 4 languages, < 10 s", distance_oracle);
  run("counts: 1000 random 5x5 pairs equal brute force; (1,1)+(0,3) -> 1/4", counts_oracle);
  run("synthetic extremes: perfect = 1.0 and disjoint = 0.0 at every layer", alignment_extremes);
  run("quartiles: nearest rank 1..8 @ 0.75 = 6; theta_A = Q3(A), theta_D = Q1(D)", quartiles);
  run("aggregation: identity bit-exact, identical heads, global mean within 1e-6", aggregation_identities);
  run("type ranking: 3 types x 2 models x 2 samples fixture with strict cutoff", algorithm_fixture);
  run("bundle: byte-exact round trip and specified load errors", bundle_round_trip);
  run("filtering: '.' ranked below cutoff removes exactly its row and column", buffer_filtering);
  std::printf("%d failed\n", failures);
  return failures;
}
