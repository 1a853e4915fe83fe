// Serial reference vs. OpenMP kernels. Set OMP_NUM_THREADS to vary the
// thread count.

#include <benchmark/benchmark.h>

#include <random>

#include "catprobe/cat_metric.hpp"
#include "catprobe/distance.hpp"
#include "catprobe/probe.hpp"
#include "catprobe/type_filter.hpp"
#include "support/synth.hpp"

namespace {

using namespace catprobe;

std::string long_program(int statements) {
  std::string code = "def f(a, b):\n";
  for (int i = 0; i < statements; ++i)
    code += "    x" + std::to_string(i) + " = a[" + std::to_string(i) + "] + b.get(" + std::to_string(i) + ")\n";
  code += "    return a\n";
  return code;
}

const CorpusSample& big_sample() {
  static const CorpusSample s = build_sample(make_source_unit("big", Language::python, long_program(150)));
  return s;
}

void BM_Distance(benchmark::State& state) {
  const auto& uast = big_sample().uast;
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(parallel ? distance_matrix(uast) : distance_matrix_serial(uast));
  state.counters["leaves"] = static_cast<double>(uast.leaf_count());
}
BENCHMARK(BM_Distance)->Arg(0)->Arg(1)->ArgNames({"parallel"})->Unit(benchmark::kMillisecond);

struct AttentionInput {
  BundleSample sample;
  Alignment alignment;
};

const AttentionInput& attention_input() {
  static const AttentionInput in = [] {
    const auto cs = build_sample(make_source_unit("att", Language::python, long_program(12)));
    testing::SynthOptions opt;
    opt.layers = 12;
    opt.heads = 12;
    opt.split = true;
    opt.specials = true;
    opt.max_subtokens = 255;
    auto bs = testing::synth_sample(
        cs, [](const CorpusSample&, std::size_t l, std::size_t i, std::size_t j) { return 1.0 + (i + j + l) % 9; }, opt);
    auto al = align_subtokens(bs.subtokens, cs.tokens);
    return AttentionInput{std::move(bs), std::move(al)};
  }();
  return in;
}

void BM_TokenAttention(benchmark::State& state) {
  const auto& in = attention_input();
  const bool parallel = state.range(0) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(parallel ? token_attention(in.sample, in.alignment)
                                      : token_attention_serial(in.sample, in.alignment));
  state.counters["subtokens"] = static_cast<double>(in.sample.subtokens.size());
}
BENCHMARK(BM_TokenAttention)->Arg(0)->Arg(1)->ArgNames({"parallel"})->Unit(benchmark::kMillisecond);

struct CountsInput {
  std::vector<AttentionMatrix> a;
  std::vector<DistanceMatrix> d;
  std::vector<ScoredPair> pairs;
};

const CountsInput& counts_input() {
  static const CountsInput in = [] {
    CountsInput c;
    std::mt19937 rng(0);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::uniform_int_distribution<std::uint32_t> hop(1, 30);
    for (int k = 0; k < 3000; ++k) {
      const std::size_t n = 20 + static_cast<std::size_t>(k % 60);
      AttentionMatrix a(n);
      DistanceMatrix d(n);
      for (auto& v : a.cells()) v = u(rng);
      for (auto& v : d.cells()) v = hop(rng);
      c.a.push_back(std::move(a));
      c.d.push_back(std::move(d));
    }
    for (std::size_t k = 0; k < c.a.size(); ++k)
      c.pairs.push_back({&c.a[k], &c.d[k], attention_threshold(c.a[k]), distance_threshold(c.d[k])});
    return c;
  }();
  return in;
}

void BM_CorpusCounts(benchmark::State& state) {
  const auto& in = counts_input();
  const bool parallel = state.range(0) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(parallel ? corpus_counts(in.pairs) : corpus_counts_serial(in.pairs));
  state.counters["samples"] = static_cast<double>(in.pairs.size());
}
BENCHMARK(BM_CorpusCounts)->Arg(0)->Arg(1)->ArgNames({"parallel"})->Unit(benchmark::kMillisecond);

void BM_ModelConfidences(benchmark::State& state) {
  const auto& in = counts_input();
  static const std::vector<std::vector<std::string>> types = [&] {
    std::vector<std::vector<std::string>> t;
    for (const auto& a : in.a) {
      std::vector<std::string> row(a.size());
      for (std::size_t i = 0; i < row.size(); ++i) row[i] = "t" + std::to_string(i % 17);
      t.push_back(std::move(row));
    }
    return t;
  }();
  std::vector<ConfidenceSample> samples;
  for (std::size_t k = 0; k < in.a.size(); ++k) samples.push_back({&in.a[k], types[k], in.pairs[k].theta_a});
  const bool parallel = state.range(0) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(parallel ? model_confidences("m", samples) : model_confidences_serial("m", samples));
}
BENCHMARK(BM_ModelConfidences)->Arg(0)->Arg(1)->ArgNames({"parallel"})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
