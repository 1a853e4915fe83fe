#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "catprobe/bundle.hpp"
#include "catprobe/cat_metric.hpp"
#include "catprobe/distance.hpp"
#include "catprobe/type_filter.hpp"
#include "catprobe/uast.hpp"

namespace catprobe {

// A parsed code sample with its tokens and distance matrix.
struct CorpusSample {
  SourceUnit unit;
  UAst uast;
  std::vector<LeafToken> tokens;
  DistanceMatrix distance;
};

struct Corpus {
  std::vector<CorpusSample> samples;
  std::vector<SkippedSample> rejected;

  const CorpusSample* find(const Sha256Digest& hash) const;
  const CorpusSample* find_id(const std::string& id) const;
};

struct CorpusOptions {
  ParseOptions parse;
  // Keeps only files of this language (plus extensionless ones); otherwise
  // the language comes from the file extension.
  std::optional<Language> language;
  // Keep at most this many samples, chosen by a seeded shuffle.
  std::size_t max_samples = 3000;
  std::uint64_t seed = 0;
};

// Parses one sample. Throws like parse_source().
CorpusSample build_sample(SourceUnit unit, const ParseOptions& options = {});

// Parses samples in parallel; failures land in Corpus::rejected, the order
// of `units` is preserved.
Corpus build_corpus(std::vector<SourceUnit> units, const ParseOptions& options = {});

// Reads every regular file under `dir` whose language is known, sorted by
// relative path (the sample id), applies the sample cap, then parses.
Corpus load_corpus(const std::filesystem::path& dir, const CorpusOptions& options = {});

// Deterministic subset of size min(k, n): Fisher-Yates on mt19937_64(seed),
// result sorted back into input order.
std::vector<std::size_t> seeded_sample(std::size_t n, std::size_t k, std::uint64_t seed);

struct ProbeConfig {
  // Layer used for type confidences; negative counts from the end.
  int confidence_layer = -1;
  MaskSemantics mask = MaskSemantics::column;
  ThresholdScope scope = ThresholdScope::per_sample;
  int per_model_cutoff = kDefaultPerModelCutoff;
  bool include_diagonal = true;
  AlignOptions align;
};

// One sample of one model, aligned and aggregated.
struct PreparedSample {
  const CorpusSample* source = nullptr;
  Alignment alignment;
  TokenAttention attention;
  // Types and distances restricted to alignment.kept.
  std::vector<std::string> types;
  DistanceMatrix distance;
  std::vector<float> theta_a;  // per layer
  std::uint32_t theta_d = 1;
};

struct PreparedModel {
  std::string model;
  Language language = Language::python;
  std::size_t num_layers = 0;
  std::vector<PreparedSample> samples;
  std::vector<SkippedSample> skipped;
};

// Pairs bundle samples with corpus samples by content hash, aligns and
// aggregates them, and computes thresholds under config.scope. Samples that
// fail are listed in `skipped`.
PreparedModel prepare_model(const Corpus& corpus, const AttentionBundle& bundle, const ProbeConfig& config);

struct FrequentTypes {
  std::vector<std::map<std::string, TypeConfidence>> confidences;  // one per model
  TypeRanking ranking;
};

// Frequent-type selection over all models of one language.
FrequentTypes frequent_types(std::span<const PreparedModel> models, const ProbeConfig& config);

// CAT-score per layer with a fixed frequent set. A sample that fails
// filtering is skipped for every layer.
CatScoreResult layerwise_scores(const PreparedModel& model, const std::set<std::string>& frequent_set,
                                const ProbeConfig& config);

std::size_t resolve_layer(int layer, std::size_t num_layers);

}  // namespace catprobe
