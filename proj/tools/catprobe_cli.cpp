// catprobe: parse corpora, rank frequent token types, compute layer-wise
// CAT-scores and export heatmap / bar-plot data.

#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "catprobe/errors.hpp"
#include "catprobe/report.hpp"

namespace {

using catprobe::RunConfig;

void add_corpus_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--corpus", cfg.corpus, "Directory of source files (language from extension)")->required();
  cmd->add_option("--lang", cfg.language, "Force one language: go, java, javascript, python")
      ->transform([](std::string s) { return std::string(catprobe::to_string(catprobe::parse_language(s))); });
  cmd->add_option("--max-samples,-C", cfg.max_samples, "Sample cap C")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--seed", cfg.seed, "Seed for the sample-cap shuffle")->capture_default_str();
  cmd->add_flag("--allow-errors", cfg.parse.allow_errors, "Keep samples whose parse tree has error nodes");
  cmd->add_flag("--exclude-comments", cfg.parse.exclude_comments, "Drop comment leaves");
}

void add_probe_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--bundle,-b", cfg.bundles, "Attention bundle (repeatable, one per model)")->required();
  static const std::map<std::string, catprobe::MaskSemantics> masks{
      {"column", catprobe::MaskSemantics::column},
      {"row", catprobe::MaskSemantics::row},
      {"either", catprobe::MaskSemantics::either}};
  static const std::map<std::string, catprobe::ThresholdScope> scopes{
      {"per_sample", catprobe::ThresholdScope::per_sample}, {"per_corpus", catprobe::ThresholdScope::per_corpus}};
  cmd->add_option("--mask", cfg.probe.mask, "Type mask semantics for confidences")
      ->transform(CLI::CheckedTransformer(masks, CLI::ignore_case));
  cmd->add_option("--scope", cfg.probe.scope, "Threshold scope")->transform(CLI::CheckedTransformer(scopes, CLI::ignore_case));
  cmd->add_option("--cutoff", cfg.probe.per_model_cutoff, "Per-model rank cutoff (threshold is cutoff x models)")
      ->capture_default_str();
  cmd->add_option("--confidence-layer", cfg.probe.confidence_layer, "Layer for type confidences (negative from end)")
      ->capture_default_str();
  cmd->add_flag("--exclude-diagonal", [&cfg](std::int64_t) { cfg.probe.include_diagonal = false; },
                "Leave i == j cells out of the counts");
  cmd->add_flag("--skip-whitespace-subtokens", cfg.probe.align.skip_whitespace,
                "Leave whitespace-only subtokens unaligned instead of failing the sample");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAT-probing toolkit: attention vs. U-AST distance analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(catprobe::kToolVersion));

  RunConfig cfg;
  app.add_option("--out,-o", cfg.out_dir, "Output directory (env CATPROBE_OUT_DIR overrides)")->capture_default_str();

  auto* parse = app.add_subcommand("parse", "Parse a corpus into token lists and distance matrices");
  add_corpus_flags(parse, cfg);

  auto* freq = app.add_subcommand("freq-types", "Rank token types and select the frequent set");
  add_corpus_flags(freq, cfg);
  add_probe_flags(freq, cfg);

  auto* score = app.add_subcommand("cat-score", "Layer-wise CAT-scores per model");
  add_corpus_flags(score, cfg);
  add_probe_flags(score, cfg);
  score->add_option("--types", cfg.types_report, "freq-types report providing the frequent set");

  auto* heat = app.add_subcommand("heatmap", "Attention/distance CSVs for one sample, before and after filtering");
  add_corpus_flags(heat, cfg);
  add_probe_flags(heat, cfg);
  heat->add_option("--sample", cfg.sample, "Sample id (relative path) or content hash")->required();
  heat->add_option("--types", cfg.types_report, "freq-types report providing the frequent set");
  heat->add_option("--keep-types", cfg.keep_types, "Explicit frequent set (overrides --types)")->delimiter(',');
  heat->add_option("--layer", cfg.heatmap_layer, "Layer to export (negative from end)")->capture_default_str();

  auto* bars = app.add_subcommand("type-bars", "Per-language type frequency rows for bar plots");
  bars->add_option("--types", cfg.types_report, "freq-types report")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    catprobe::CommandOutcome outcome;
    if (*parse) outcome = catprobe::cmd_parse(cfg);
    else if (*freq) outcome = catprobe::cmd_freq_types(cfg);
    else if (*score) outcome = catprobe::cmd_cat_score(cfg);
    else if (*heat) outcome = catprobe::cmd_heatmap(cfg);
    else if (*bars) outcome = catprobe::cmd_type_bars(cfg);

    for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& p : outcome.written) std::cout << p.generic_string() << '\n';
    if (outcome.scored == 0) {
      std::cerr << "error: no sample was processed successfully\n";
      return 1;
    }
  } catch (const catprobe::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
