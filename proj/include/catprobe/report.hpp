#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "catprobe/probe.hpp"
#include "json.hpp"

namespace catprobe {

inline constexpr const char* kToolVersion = "0.1.0";
// Overrides RunConfig::out_dir when set.
inline constexpr const char* kOutDirEnv = "CATPROBE_OUT_DIR";

// Options shared by every subcommand; each command reads the fields it needs.
struct RunConfig {
  std::optional<Language> language;  // forced language, else by extension
  std::filesystem::path corpus;
  std::vector<std::filesystem::path> bundles;
  std::filesystem::path out_dir = "catprobe-out";
  std::size_t max_samples = 3000;
  std::uint64_t seed = 0;
  ParseOptions parse;
  ProbeConfig probe;
  // freq-types report supplying the frequent set (cat-score, heatmap, type-bars).
  std::optional<std::filesystem::path> types_report;
  // heatmap only.
  std::string sample;
  std::vector<std::string> keep_types;
  int heatmap_layer = -1;

  nlohmann::json to_json() const;
};

// Rejects configs that cannot run: C < 1 or missing input paths.
void validate(const RunConfig& config, bool needs_corpus, bool needs_bundles);

// Applies kOutDirEnv.
std::filesystem::path effective_out_dir(const RunConfig& config);

// What a command did. `scored` counts successfully processed samples; the
// CLI exits nonzero iff it is zero.
struct CommandOutcome {
  std::size_t scored = 0;
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

// Run-wide provenance block embedded in every output.
nlohmann::json provenance(const RunConfig& config, const std::vector<AttentionBundle>& bundles = {});

// Per-sample token list and distance matrix, keyed by content hash, plus a
// manifest of accepted and rejected files.
CommandOutcome cmd_parse(const RunConfig& config);

// Frequent-type report for every language present in the bundles.
CommandOutcome cmd_freq_types(const RunConfig& config);
nlohmann::json freq_types_report(const RunConfig& config, const Corpus& corpus,
                                 const std::vector<AttentionBundle>& bundles);

// Per-layer CAT-scores per model as JSON and CSV.
CommandOutcome cmd_cat_score(const RunConfig& config);

// Attention and distance CSVs for one sample, before and after filtering.
CommandOutcome cmd_heatmap(const RunConfig& config);

// Bar-plot rows (type, confidence, rank_sum) per language.
CommandOutcome cmd_type_bars(const RunConfig& config);
struct TypeBar {
  std::string language;
  std::string type;
  double confidence = 0.0;  // mean over models
  int rank_sum = 0;
  bool frequent = false;
};
std::vector<TypeBar> type_bars(const nlohmann::json& freq_report);
void write_type_bars_csv(std::ostream& out, const std::vector<TypeBar>& bars, const nlohmann::json& prov);

// Serialized forms shared by the commands and their tests.
nlohmann::json to_json(const TypeRanking& ranking, const std::vector<std::map<std::string, TypeConfidence>>& confidences);
nlohmann::json to_json(const CatScoreResult& result);

}  // namespace catprobe
