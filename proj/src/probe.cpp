#include "catprobe/probe.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "catprobe/errors.hpp"

namespace catprobe {

namespace fs = std::filesystem;

const CorpusSample* Corpus::find(const Sha256Digest& hash) const {
  for (const auto& s : samples)
    if (s.unit.content_hash == hash) return &s;
  return nullptr;
}

const CorpusSample* Corpus::find_id(const std::string& id) const {
  for (const auto& s : samples)
    if (s.unit.id == id) return &s;
  return nullptr;
}

CorpusSample build_sample(SourceUnit unit, const ParseOptions& options) {
  CorpusSample s;
  s.uast = parse_source(unit, options);
  s.tokens = leaf_tokens(s.uast, unit);
  s.distance = distance_matrix_serial(s.uast);
  s.unit = std::move(unit);
  return s;
}

Corpus build_corpus(std::vector<SourceUnit> units, const ParseOptions& options) {
  const auto n = static_cast<std::ptrdiff_t>(units.size());
  std::vector<std::optional<CorpusSample>> built(units.size());
  std::vector<std::string> errors(units.size());
#pragma omp parallel for schedule(dynamic, 4) if (n > 4)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    try {
      built[i] = build_sample(units[i], options);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  Corpus corpus;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (built[i]) corpus.samples.push_back(std::move(*built[i]));
    else corpus.rejected.push_back({units[i].id, errors[i]});
  }
  return corpus;
}

std::vector<std::size_t> seeded_sample(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (k >= n) return idx;
  // mt19937_64 output is fixed by the standard; bounded draws use rejection
  // sampling so the subset does not depend on the library's distributions.
  std::mt19937_64 rng(seed);
  auto bounded = [&](std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do x = rng();
    while (x >= limit);
    return x % bound;
  };
  for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[bounded(i + 1)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Corpus load_corpus(const fs::path& dir, const CorpusOptions& options) {
  if (!fs::is_directory(dir)) throw Error("corpus directory not found: " + dir.string());
  struct Entry {
    std::string id;
    fs::path path;
    Language language;
  };
  std::vector<Entry> entries;
  for (const auto& de : fs::recursive_directory_iterator(dir)) {
    if (!de.is_regular_file()) continue;
    const auto ext = de.path().extension().string();
    const auto detected = language_from_extension(ext);
    // A forced language also claims extensionless files.
    std::optional<Language> lang = detected;
    if (options.language) lang = (!detected && ext.empty()) || detected == options.language ? options.language : std::nullopt;
    if (!lang) continue;
    entries.push_back({fs::relative(de.path(), dir).generic_string(), de.path(), *lang});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.id < b.id; });

  Corpus rejected_reads;
  std::vector<SourceUnit> units;
  for (auto i : seeded_sample(entries.size(), options.max_samples, options.seed)) {
    const auto& e = entries[i];
    std::ifstream in(e.path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
      units.push_back(make_source_unit(e.id, e.language, buf.str()));
    } catch (const Error& err) {
      rejected_reads.rejected.push_back({e.id, err.what()});
    }
  }
  Corpus corpus = build_corpus(std::move(units), options.parse);
  corpus.rejected.insert(corpus.rejected.end(), rejected_reads.rejected.begin(), rejected_reads.rejected.end());
  std::sort(corpus.rejected.begin(), corpus.rejected.end(),
            [](const SkippedSample& a, const SkippedSample& b) { return a.id < b.id; });
  return corpus;
}

std::size_t resolve_layer(int layer, std::size_t num_layers) {
  const auto l = static_cast<long long>(layer);
  const auto n = static_cast<long long>(num_layers);
  const long long resolved = l < 0 ? n + l : l;
  if (resolved < 0 || resolved >= n)
    throw RangeError("layer " + std::to_string(layer) + " out of range for " + std::to_string(num_layers) + " layers");
  return static_cast<std::size_t>(resolved);
}

PreparedModel prepare_model(const Corpus& corpus, const AttentionBundle& bundle, const ProbeConfig& config) {
  PreparedModel out;
  out.model = bundle.model;
  out.language = bundle.language;
  out.num_layers = bundle.num_layers;

  const auto n = static_cast<std::ptrdiff_t>(bundle.samples.size());
  std::vector<std::optional<PreparedSample>> prepared(bundle.samples.size());
  std::vector<std::string> errors(bundle.samples.size());
#pragma omp parallel for schedule(dynamic, 2) if (n > 2)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const auto& bs = bundle.samples[i];
    try {
      const CorpusSample* cs = corpus.find(bs.content_hash);
      if (!cs) throw UnknownSample("no corpus sample with content hash " + to_hex(bs.content_hash));
      if (cs->unit.language != bundle.language)
        throw UnknownSample("corpus sample is " + std::string(to_string(cs->unit.language)) + ", bundle is " +
                            std::string(to_string(bundle.language)));
      PreparedSample ps;
      ps.source = cs;
      ps.alignment = align_subtokens(bs.subtokens, cs->tokens, cs->unit.code, config.align);
      if (ps.alignment.kept.empty()) throw AlignmentError("no token received a subtoken");
      ps.attention = token_attention_serial(bs, ps.alignment, bundle.model);
      for (auto t : ps.alignment.kept) ps.types.push_back(cs->tokens[t].type_label);
      ps.distance = cs->distance.principal_submatrix(ps.alignment.kept);
      ps.theta_d = distance_threshold(ps.distance);
      for (const auto& layer : ps.attention.layers) ps.theta_a.push_back(attention_threshold(layer));
      prepared[i] = std::move(ps);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    if (prepared[i]) out.samples.push_back(std::move(*prepared[i]));
    else out.skipped.push_back({bundle.samples[i].id, errors[i]});
  }

  if (config.scope == ThresholdScope::per_corpus && !out.samples.empty()) {
    std::vector<std::uint32_t> all_d;
    for (const auto& s : out.samples) all_d.insert(all_d.end(), s.distance.cells().begin(), s.distance.cells().end());
    const auto theta_d = std::max<std::uint32_t>(1, quartile(std::span<const std::uint32_t>(all_d), kDistanceQuantile));
    for (std::size_t l = 0; l < out.num_layers; ++l) {
      std::vector<float> all_a;
      for (const auto& s : out.samples)
        all_a.insert(all_a.end(), s.attention.layers[l].cells().begin(), s.attention.layers[l].cells().end());
      const float theta_a = quartile(std::span<const float>(all_a), kAttentionQuantile);
      for (auto& s : out.samples) s.theta_a[l] = theta_a;
    }
    for (auto& s : out.samples) s.theta_d = theta_d;
  }
  return out;
}

FrequentTypes frequent_types(std::span<const PreparedModel> models, const ProbeConfig& config) {
  FrequentTypes out;
  for (const auto& m : models) {
    const auto layer = resolve_layer(config.confidence_layer, m.num_layers);
    std::vector<ConfidenceSample> inputs;
    inputs.reserve(m.samples.size());
    for (const auto& s : m.samples) inputs.push_back({&s.attention.layers[layer], s.types, s.theta_a[layer]});
    out.confidences.push_back(model_confidences(m.model, inputs, config.mask));
  }
  out.ranking = rank_types(out.confidences, config.per_model_cutoff);
  return out;
}

CatScoreResult layerwise_scores(const PreparedModel& model, const std::set<std::string>& frequent_set,
                                const ProbeConfig& config) {
  CatScoreResult result;
  result.model = model.model;
  result.language = std::string(to_string(model.language));
  result.include_diagonal = config.include_diagonal;
  result.skipped = model.skipped;

  struct Filtered {
    const PreparedSample* sample;
    std::vector<std::size_t> kept;
    DistanceMatrix distance;
  };
  std::vector<Filtered> survivors;
  for (const auto& s : model.samples) {
    auto kept = select_frequent(s.types, frequent_set);
    if (kept.empty()) {
      result.skipped.push_back({s.attention.sample_id, "EmptySelection: no token has a frequent type"});
      continue;
    }
    auto d = s.distance.principal_submatrix(kept);
    survivors.push_back({&s, std::move(kept), std::move(d)});
  }
  result.sample_count = survivors.size();

  for (std::size_t l = 0; l < model.num_layers; ++l) {
    std::vector<AttentionMatrix> filtered;
    filtered.reserve(survivors.size());
    for (const auto& f : survivors) filtered.push_back(f.sample->attention.layers[l].principal_submatrix(f.kept));
    std::vector<ScoredPair> pairs;
    pairs.reserve(survivors.size());
    for (std::size_t k = 0; k < survivors.size(); ++k)
      pairs.push_back({&filtered[k], &survivors[k].distance, survivors[k].sample->theta_a[l], survivors[k].sample->theta_d});

    LayerScore ls;
    ls.layer = l;
    ls.counts = corpus_counts(pairs, config.include_diagonal);
    ls.counts_alt_diagonal = corpus_counts(pairs, !config.include_diagonal);
    ls.empty_union = ls.counts.union_ == 0;
    ls.score = ls.empty_union ? 0.0 : cat_score(ls.counts);
    ls.score_alt_diagonal = ls.counts_alt_diagonal.union_ == 0 ? 0.0 : cat_score(ls.counts_alt_diagonal);
    result.per_layer.push_back(ls);
  }
  return result;
}

}  // namespace catprobe
