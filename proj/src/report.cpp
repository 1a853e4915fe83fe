#include "catprobe/report.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "catprobe/csv.hpp"
#include "catprobe/errors.hpp"

namespace catprobe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view to_string(ThresholdScope s) { return s == ThresholdScope::per_sample ? "per_sample" : "per_corpus"; }

std::string_view to_string(MaskSemantics m) {
  switch (m) {
    case MaskSemantics::column: return "column";
    case MaskSemantics::row: return "row";
    case MaskSemantics::either: return "either";
  }
  return "column";
}

void write_text(const fs::path& path, const std::string& text, CommandOutcome& outcome) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("short write on " + path.string());
  outcome.written.push_back(path);
}

void write_json(const fs::path& path, const json& doc, CommandOutcome& outcome) {
  write_text(path, doc.dump(2) + "\n", outcome);
}

// CSV files carry provenance as leading '#' comment lines.
std::string csv_preamble(const json& prov) { return "# provenance: " + prov.dump() + "\n"; }

std::vector<AttentionBundle> load_bundles(const RunConfig& config, CommandOutcome& outcome) {
  std::vector<AttentionBundle> bundles;
  for (const auto& p : config.bundles) {
    bundles.push_back(load_bundle(p));
    for (const auto& w : bundles.back().warnings) outcome.warnings.push_back(p.string() + ": " + w);
  }
  return bundles;
}

Corpus corpus_for(const RunConfig& config) {
  CorpusOptions opts;
  opts.parse = config.parse;
  opts.language = config.language;
  opts.max_samples = config.max_samples;
  opts.seed = config.seed;
  return load_corpus(config.corpus, opts);
}

json skipped_json(const std::vector<SkippedSample>& skipped) {
  json arr = json::array();
  for (const auto& s : skipped) arr.push_back({{"id", s.id}, {"reason", s.reason}});
  return arr;
}

json ordered_languages(const std::vector<AttentionBundle>& bundles) {
  std::set<std::string> langs;
  for (const auto& b : bundles) langs.insert(std::string(catprobe::to_string(b.language)));
  return json(langs);
}

// Frequent sets keyed by language, read from a freq-types report.
std::map<std::string, std::set<std::string>> frequent_sets_from(const fs::path& report_path) {
  std::ifstream in(report_path);
  if (!in) throw FormatError("cannot open type report " + report_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("type report is not valid JSON: " + std::string(e.what()));
  }
  std::map<std::string, std::set<std::string>> out;
  if (!doc.contains("languages") || !doc["languages"].is_object())
    throw FormatError("type report has no 'languages' object");
  for (const auto& [lang, entry] : doc["languages"].items())
    out[lang] = entry.at("frequent_set").get<std::set<std::string>>();
  return out;
}

}  // namespace

json RunConfig::to_json() const {
  json bundle_paths = json::array();
  for (const auto& b : bundles) bundle_paths.push_back(b.generic_string());
  return {
      {"language", language ? json(std::string(catprobe::to_string(*language))) : json("auto")},
      {"corpus", corpus.generic_string()},
      {"bundles", bundle_paths},
      {"max_samples", max_samples},
      {"seed", seed},
      {"allow_errors", parse.allow_errors},
      {"exclude_comments", parse.exclude_comments},
      {"confidence_layer", probe.confidence_layer},
      {"mask", std::string(to_string(probe.mask))},
      {"threshold_scope", std::string(to_string(probe.scope))},
      {"theta_a", "third quartile (nearest rank) of token-level attention, before filtering"},
      {"theta_d", "first quartile (nearest rank) of the distance matrix, floored at 1"},
      {"per_model_cutoff", probe.per_model_cutoff},
      {"include_diagonal", probe.include_diagonal},
      {"skip_whitespace_subtokens", probe.align.skip_whitespace},
      {"special_subtokens", "excluded before aggregation"},
      {"token_rows_renormalized", false},
      {"leaf_decomposition", "grammar leaves verbatim (string literals split as the grammar splits them)"},
      {"types_report", types_report ? json(types_report->generic_string()) : json(nullptr)},
  };
}

void validate(const RunConfig& config, bool needs_corpus, bool needs_bundles) {
  if (config.max_samples < 1) throw Error("sample cap C must be at least 1");
  if (needs_corpus && !fs::is_directory(config.corpus))
    throw Error("corpus directory not found: " + config.corpus.string());
  if (needs_bundles && config.bundles.empty()) throw Error("at least one --bundle is required");
  for (const auto& b : config.bundles)
    if (!fs::exists(b)) throw Error("bundle not found: " + b.string());
  if (config.types_report && !fs::exists(*config.types_report))
    throw Error("type report not found: " + config.types_report->string());
}

fs::path effective_out_dir(const RunConfig& config) {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return config.out_dir;
}

json provenance(const RunConfig& config, const std::vector<AttentionBundle>& bundles) {
  json b = json::array();
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const auto& bundle = bundles[i];
    b.push_back({{"path", i < config.bundles.size() ? config.bundles[i].generic_string() : ""},
                 {"model", bundle.model},
                 {"language", std::string(catprobe::to_string(bundle.language))},
                 {"format_version", bundle.format_version},
                 {"num_layers", bundle.num_layers},
                 {"num_heads", bundle.num_heads},
                 {"metadata", bundle.metadata}});
  }
  return {{"tool", "catprobe"},
          {"version", kToolVersion},
          {"grammars", grammar_versions()},
          {"config", config.to_json()},
          {"bundles", b}};
}

CommandOutcome cmd_parse(const RunConfig& config) {
  validate(config, true, false);
  CommandOutcome outcome;
  const auto out_dir = effective_out_dir(config);
  fs::create_directories(out_dir);
  const Corpus corpus = corpus_for(config);
  const json prov = provenance(config);

  json accepted = json::array();
  for (const auto& s : corpus.samples) {
    const auto hash = s.unit.hash_hex();
    json tokens = json::array();
    for (const auto& t : s.tokens)
      tokens.push_back({{"index", t.index},
                        {"text", t.text},
                        {"type", t.type_label},
                        {"start", t.span.start},
                        {"end", t.span.end},
                        {"node_id", t.node_id}});
    write_json(out_dir / (hash + ".tokens.json"),
               {{"provenance", prov},
                {"id", s.unit.id},
                {"language", std::string(catprobe::to_string(s.unit.language))},
                {"content_hash", hash},
                {"node_count", s.uast.nodes.size()},
                {"tokens", tokens}},
               outcome);

    std::vector<std::string> labels;
    for (const auto& t : s.tokens) labels.push_back(t.text);
    std::ostringstream csv_text;
    csv_text << csv_preamble(prov) << "# sample: " << s.unit.id << "\n";
    write_distance_csv(csv_text, s.distance, labels);
    write_text(out_dir / (hash + ".dist.csv"), csv_text.str(), outcome);
    accepted.push_back({{"id", s.unit.id}, {"content_hash", hash}, {"tokens", s.tokens.size()}});
  }
  for (const auto& r : corpus.rejected) outcome.warnings.push_back("rejected " + r.id + ": " + r.reason);
  write_json(out_dir / "parse_manifest.json",
             {{"provenance", prov}, {"accepted", accepted}, {"rejected", skipped_json(corpus.rejected)}}, outcome);
  outcome.scored = corpus.samples.size();
  return outcome;
}

json to_json(const TypeRanking& ranking, const std::vector<std::map<std::string, TypeConfidence>>& confidences) {
  json conf = json::object();
  for (std::size_t m = 0; m < confidences.size() && m < ranking.models.size(); ++m) {
    json per_type = json::object();
    for (const auto& [t, c] : confidences[m])
      per_type[t] = {{"confidence", c.confidence}, {"sample_count", c.sample_count}};
    conf[ranking.models[m]] = per_type;
  }
  return {{"models", ranking.models},
          {"per_model_cutoff", ranking.per_model_cutoff},
          {"cutoff", ranking.cutoff},
          {"confidences", conf},
          {"ranks", ranking.ranks},
          {"rank_sums", ranking.rank_sum},
          {"ordered_types", ranking.ordered_types()},
          {"frequent_set", ranking.frequent_set},
          {"warnings", ranking.warnings}};
}

json freq_types_report(const RunConfig& config, const Corpus& corpus, const std::vector<AttentionBundle>& bundles) {
  json languages = json::object();
  for (const auto& lang_json : ordered_languages(bundles)) {
    const auto lang = parse_language(lang_json.get<std::string>());
    std::vector<PreparedModel> models;
    json skipped = json::object();
    for (const auto& b : bundles) {
      if (b.language != lang) continue;
      models.push_back(prepare_model(corpus, b, config.probe));
      skipped[b.model] = skipped_json(models.back().skipped);
    }
    FrequentTypes ft = frequent_types(models, config.probe);
    json entry = to_json(ft.ranking, ft.confidences);
    std::size_t used = 0;
    for (const auto& m : models) used = std::max(used, m.samples.size());
    entry["samples_used"] = used;
    entry["skipped"] = skipped;
    entry["confidence_layer"] = config.probe.confidence_layer;
    languages[lang_json.get<std::string>()] = entry;
  }
  return {{"provenance", provenance(config, bundles)}, {"languages", languages}};
}

CommandOutcome cmd_freq_types(const RunConfig& config) {
  validate(config, true, true);
  CommandOutcome outcome;
  const auto out_dir = effective_out_dir(config);
  fs::create_directories(out_dir);
  const auto bundles = load_bundles(config, outcome);
  const Corpus corpus = corpus_for(config);
  const json report = freq_types_report(config, corpus, bundles);
  for (const auto& [lang, entry] : report["languages"].items()) {
    outcome.scored += entry["samples_used"].get<std::size_t>();
    for (const auto& w : entry["warnings"]) outcome.warnings.push_back(lang + ": " + w.get<std::string>());
  }
  write_json(out_dir / "freq_types.json", report, outcome);
  return outcome;
}

json to_json(const CatScoreResult& r) {
  json layers = json::array();
  for (const auto& l : r.per_layer)
    layers.push_back({{"layer", l.layer},
                      {"matched", l.counts.matched},
                      {"union", l.counts.union_},
                      {"score", l.score},
                      {"empty_union", l.empty_union},
                      {"alt_diagonal", {{"include_diagonal", !r.include_diagonal},
                                        {"matched", l.counts_alt_diagonal.matched},
                                        {"union", l.counts_alt_diagonal.union_},
                                        {"score", l.score_alt_diagonal}}}});
  return {{"model", r.model},
          {"language", r.language},
          {"C", r.sample_count},
          {"include_diagonal", r.include_diagonal},
          {"per_layer", layers},
          {"last_layer_score", r.headline()},
          {"skipped", skipped_json(r.skipped)}};
}

CommandOutcome cmd_cat_score(const RunConfig& config) {
  validate(config, true, true);
  CommandOutcome outcome;
  const auto out_dir = effective_out_dir(config);
  fs::create_directories(out_dir);
  const auto bundles = load_bundles(config, outcome);
  const Corpus corpus = corpus_for(config);
  const json prov = provenance(config, bundles);

  std::map<std::string, std::set<std::string>> frequent;
  if (config.types_report) frequent = frequent_sets_from(*config.types_report);

  // Models grouped per language so frequent sets can be computed on the fly.
  std::map<Language, std::vector<std::size_t>> by_language;
  for (std::size_t i = 0; i < bundles.size(); ++i) by_language[bundles[i].language].push_back(i);

  json results = json::array();
  std::ostringstream csv_text;
  csv_text << csv_preamble(prov);
  csv_text << "model,language,layer,matched,union,score,alt_matched,alt_union,alt_score,C\n";
  for (const auto& [lang, indices] : by_language) {
    const std::string lang_name(catprobe::to_string(lang));
    std::vector<PreparedModel> models;
    for (auto i : indices) models.push_back(prepare_model(corpus, bundles[i], config.probe));
    std::set<std::string> frequent_set;
    if (config.types_report) {
      auto it = frequent.find(lang_name);
      if (it == frequent.end()) throw FormatError("type report has no entry for " + lang_name);
      frequent_set = it->second;
    } else {
      frequent_set = frequent_types(models, config.probe).ranking.frequent_set;
    }
    for (const auto& m : models) {
      const auto r = layerwise_scores(m, frequent_set, config.probe);
      json jr = to_json(r);
      jr["frequent_set"] = frequent_set;
      results.push_back(jr);
      outcome.scored += r.sample_count;
      for (const auto& l : r.per_layer)
        csv_text << csv::escape(r.model) << ',' << lang_name << ',' << l.layer << ',' << l.counts.matched << ','
                 << l.counts.union_ << ',' << csv::format_number(l.score) << ',' << l.counts_alt_diagonal.matched
                 << ',' << l.counts_alt_diagonal.union_ << ',' << csv::format_number(l.score_alt_diagonal) << ','
                 << r.sample_count << '\n';
    }
  }
  write_json(out_dir / "cat_scores.json", {{"provenance", prov}, {"results", results}}, outcome);
  write_text(out_dir / "cat_scores.csv", csv_text.str(), outcome);
  return outcome;
}

CommandOutcome cmd_heatmap(const RunConfig& config) {
  validate(config, true, true);
  CommandOutcome outcome;
  const auto out_dir = effective_out_dir(config);
  fs::create_directories(out_dir);
  const auto bundles = load_bundles(config, outcome);
  const Corpus corpus = corpus_for(config);

  const CorpusSample* cs = corpus.find_id(config.sample);
  if (!cs)
    for (const auto& s : corpus.samples)
      if (s.unit.hash_hex() == config.sample) cs = &s;
  if (!cs) throw UnknownSample("sample '" + config.sample + "' is not in the corpus");

  const AttentionBundle& bundle = bundles.front();
  const BundleSample* bs = bundle.find(cs->unit.content_hash);
  if (!bs) throw UnknownSample("sample '" + config.sample + "' is not in bundle " + config.bundles.front().string());

  std::set<std::string> frequent_set;
  if (!config.keep_types.empty()) {
    frequent_set.insert(config.keep_types.begin(), config.keep_types.end());
  } else if (config.types_report) {
    const auto sets = frequent_sets_from(*config.types_report);
    auto it = sets.find(std::string(catprobe::to_string(cs->unit.language)));
    if (it == sets.end()) throw FormatError("type report has no entry for the sample's language");
    frequent_set = it->second;
  } else {
    std::vector<PreparedModel> models;
    for (const auto& b : bundles)
      if (b.language == cs->unit.language) models.push_back(prepare_model(corpus, b, config.probe));
    frequent_set = frequent_types(models, config.probe).ranking.frequent_set;
  }

  const Alignment alignment = align_subtokens(bs->subtokens, cs->tokens, cs->unit.code, config.probe.align);
  const TokenAttention ta = token_attention(*bs, alignment, bundle.model);
  const auto layer = resolve_layer(config.heatmap_layer, ta.layers.size());
  const AttentionMatrix& a = ta.layers[layer];
  const DistanceMatrix d = cs->distance.principal_submatrix(alignment.kept);
  std::vector<std::string> labels, types;
  for (auto t : alignment.kept) {
    labels.push_back(cs->tokens[t].text);
    types.push_back(cs->tokens[t].type_label);
  }
  const FilteredMatrices f = filter_matrices(a, d, types, frequent_set);
  std::vector<std::string> kept_labels;
  for (auto k : f.kept) kept_labels.push_back(labels[k]);

  json prov = provenance(config, bundles);
  prov["sample"] = {{"id", cs->unit.id},
                    {"content_hash", cs->unit.hash_hex()},
                    {"model", bundle.model},
                    {"layer", layer},
                    {"theta_a", attention_threshold(a)},
                    {"theta_d", distance_threshold(d)},
                    {"frequent_set", frequent_set}};
  const std::string stem = "heatmap_" + cs->unit.hash_hex().substr(0, 16);
  auto emit = [&](const std::string& name, auto&& matrix, const std::vector<std::string>& row_labels) {
    std::ostringstream text;
    text << csv_preamble(prov);
    csv::write_matrix(text, matrix, row_labels);
    write_text(out_dir / (stem + "_" + name + ".csv"), text.str(), outcome);
  };
  emit("attention_full", a, labels);
  emit("distance_full", d, labels);
  emit("attention_filtered", f.attention, kept_labels);
  emit("distance_filtered", f.distance, kept_labels);

  std::ostringstream tok;
  tok << csv_preamble(prov) << "index,token,type,kept\n";
  std::set<std::size_t> kept_set(f.kept.begin(), f.kept.end());
  for (std::size_t i = 0; i < labels.size(); ++i)
    tok << i << ',' << csv::escape(labels[i]) << ',' << csv::escape(types[i]) << ',' << (kept_set.contains(i) ? 1 : 0)
        << '\n';
  write_text(out_dir / (stem + "_tokens.csv"), tok.str(), outcome);
  outcome.scored = 1;
  return outcome;
}

std::vector<TypeBar> type_bars(const json& report) {
  std::vector<TypeBar> bars;
  for (const auto& [lang, entry] : report.at("languages").items()) {
    const auto frequent = entry.at("frequent_set").get<std::set<std::string>>();
    const auto& conf = entry.at("confidences");
    const auto& rank_sums = entry.at("rank_sums");
    for (const auto& t : entry.at("ordered_types")) {
      const auto type = t.get<std::string>();
      double sum = 0.0;
      std::size_t models = 0;
      for (const auto& [model, per_type] : conf.items())
        if (per_type.contains(type)) {
          sum += per_type[type].at("confidence").get<double>();
          ++models;
        }
      bars.push_back({lang, type, models ? sum / static_cast<double>(models) : 0.0, rank_sums.at(type).get<int>(),
                      frequent.contains(type)});
    }
  }
  return bars;
}

void write_type_bars_csv(std::ostream& out, const std::vector<TypeBar>& bars, const json& prov) {
  out << csv_preamble(prov) << "language,position,type,confidence,rank_sum,frequent\n";
  std::map<std::string, std::size_t> position;
  for (const auto& b : bars)
    out << b.language << ',' << ++position[b.language] << ',' << csv::escape(b.type) << ','
        << csv::format_number(b.confidence) << ',' << b.rank_sum << ',' << (b.frequent ? 1 : 0) << '\n';
}

CommandOutcome cmd_type_bars(const RunConfig& config) {
  validate(config, false, false);
  if (!config.types_report) throw Error("type-bars needs --types <freq_types.json>");
  CommandOutcome outcome;
  const auto out_dir = effective_out_dir(config);
  fs::create_directories(out_dir);
  std::ifstream in(*config.types_report);
  json report;
  try {
    report = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("type report is not valid JSON: " + std::string(e.what()));
  }
  const auto bars = type_bars(report);
  json prov = provenance(config);
  if (report.contains("provenance")) prov["source_report"] = report["provenance"];
  std::ostringstream text;
  write_type_bars_csv(text, bars, prov);
  write_text(out_dir / "type_bars.csv", text.str(), outcome);
  outcome.scored = bars.size();
  return outcome;
}

}  // namespace catprobe
