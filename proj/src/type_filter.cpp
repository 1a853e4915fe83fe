#include "catprobe/type_filter.hpp"

namespace catprobe {

float attention_threshold(const AttentionMatrix& a) { return quartile(a.cells(), kAttentionQuantile); }

std::uint32_t distance_threshold(const DistanceMatrix& d) {
  // A tiny matrix can have a zero first quartile, which would make D < theta_d
  // unsatisfiable; theta_d stays at least 1.
  return std::max<std::uint32_t>(1, quartile(d.cells(), kDistanceQuantile));
}

namespace {

struct CellCount {
  std::uint64_t part = 0;
  std::uint64_t overall = 0;
};

// Counts for every type present in one matrix in a single pass.
std::map<std::string, CellCount> count_cells(const AttentionMatrix& a, std::span<const std::string> types,
                                             float theta_a, MaskSemantics semantics) {
  const auto n = a.size();
  if (types.size() != n) throw ShapeMismatch("type list does not match the attention matrix");
  std::map<std::string, CellCount> out;
  std::vector<CellCount*> slot(n);
  for (std::size_t i = 0; i < n; ++i) slot[i] = &out[types[i]];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const bool hot = a(i, j) > theta_a;
      auto bump = [&](CellCount* c) {
        ++c->overall;
        if (hot) ++c->part;
      };
      switch (semantics) {
        case MaskSemantics::column: bump(slot[j]); break;
        case MaskSemantics::row: bump(slot[i]); break;
        case MaskSemantics::either:
          bump(slot[i]);
          if (slot[j] != slot[i]) bump(slot[j]);
          break;
      }
    }
  return out;
}

struct Accumulator {
  double sum = 0.0;
  std::size_t samples = 0;
};

void add_sample(std::map<std::string, Accumulator>& acc, const ConfidenceSample& s, MaskSemantics semantics) {
  for (const auto& [type, c] : count_cells(*s.attention, s.types, s.theta_a, semantics)) {
    auto& slot = acc[type];
    slot.sum += static_cast<double>(c.part) / static_cast<double>(c.overall);
    ++slot.samples;
  }
}

std::map<std::string, TypeConfidence> finalize(const std::string& model, const std::map<std::string, Accumulator>& acc) {
  std::map<std::string, TypeConfidence> out;
  for (const auto& [type, a] : acc)
    out[type] = TypeConfidence{model, type, a.sum / static_cast<double>(a.samples), a.samples};
  return out;
}

}  // namespace

double type_confidence(const AttentionMatrix& a, std::span<const std::string> types, float theta_a,
                       const std::string& type, MaskSemantics semantics) {
  const auto counts = count_cells(a, types, theta_a, semantics);
  const auto it = counts.find(type);
  if (it == counts.end()) throw TypeAbsent("no token of type '" + type + "'");
  return static_cast<double>(it->second.part) / static_cast<double>(it->second.overall);
}

std::map<std::string, TypeConfidence> model_confidences_serial(const std::string& model,
                                                               std::span<const ConfidenceSample> samples,
                                                               MaskSemantics semantics) {
  std::map<std::string, Accumulator> acc;
  for (const auto& s : samples) add_sample(acc, s, semantics);
  return finalize(model, acc);
}

std::map<std::string, TypeConfidence> model_confidences(const std::string& model,
                                                        std::span<const ConfidenceSample> samples,
                                                        MaskSemantics semantics) {
  for (const auto& s : samples)
    if (s.types.size() != s.attention->size()) throw ShapeMismatch("type list does not match the attention matrix");
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  std::vector<std::map<std::string, CellCount>> per_sample(samples.size());
#pragma omp parallel for schedule(dynamic, 4) if (n > 8)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto& s = samples[static_cast<std::size_t>(k)];
    per_sample[static_cast<std::size_t>(k)] = count_cells(*s.attention, s.types, s.theta_a, semantics);
  }
  // Merged in sample order, so the sums match the serial reference exactly.
  std::map<std::string, Accumulator> acc;
  for (const auto& counts : per_sample)
    for (const auto& [type, c] : counts) {
      auto& slot = acc[type];
      slot.sum += static_cast<double>(c.part) / static_cast<double>(c.overall);
      ++slot.samples;
    }
  return finalize(model, acc);
}

std::vector<std::string> TypeRanking::ordered_types() const {
  std::vector<std::string> types;
  for (const auto& [t, _] : rank_sum) types.push_back(t);
  std::stable_sort(types.begin(), types.end(),
                   [&](const std::string& a, const std::string& b) { return rank_sum.at(a) < rank_sum.at(b); });
  return types;
}

TypeRanking rank_types(std::span<const std::map<std::string, TypeConfidence>> per_model, int per_model_cutoff) {
  if (per_model.empty()) throw EmptyInput("rank_types needs at least one model");
  TypeRanking out;
  out.per_model_cutoff = per_model_cutoff;
  out.cutoff = per_model_cutoff * static_cast<int>(per_model.size());

  std::set<std::string> universe;
  for (const auto& [t, _] : per_model.front()) universe.insert(t);
  bool consistent = true;
  for (const auto& m : per_model) {
    if (m.size() != universe.size()) consistent = false;
    std::set<std::string> keep;
    for (const auto& [t, _] : m)
      if (universe.contains(t)) keep.insert(t);
      else consistent = false;
    universe = std::move(keep);
  }
  if (!consistent)
    out.warnings.push_back("models disagree on the token-type set; ranking the " + std::to_string(universe.size()) +
                           " shared types");

  for (std::size_t m = 0; m < per_model.size(); ++m) {
    const auto& conf = per_model[m];
    std::string model = conf.empty() ? "model" + std::to_string(m) : conf.begin()->second.model;
    if (model.empty() || std::find(out.models.begin(), out.models.end(), model) != out.models.end())
      model += "#" + std::to_string(m);
    out.models.push_back(model);

    std::vector<std::string> order(universe.begin(), universe.end());
    // `universe` is already lexicographic, so stable_sort breaks ties by label.
    std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
      return conf.at(a).confidence > conf.at(b).confidence;
    });
    auto& ranks = out.ranks[model];
    for (std::size_t r = 0; r < order.size(); ++r) {
      ranks[order[r]] = static_cast<int>(r + 1);
      out.rank_sum[order[r]] += static_cast<int>(r + 1);
    }
  }
  for (const auto& [t, sum] : out.rank_sum)
    if (sum < out.cutoff) out.frequent_set.insert(t);
  return out;
}

std::vector<std::size_t> select_frequent(std::span<const std::string> types, const std::set<std::string>& frequent_set) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < types.size(); ++i)
    if (frequent_set.contains(types[i])) kept.push_back(i);
  return kept;
}

FilteredMatrices filter_matrices(const AttentionMatrix& a, const DistanceMatrix& d, std::span<const std::string> types,
                                 const std::set<std::string>& frequent_set) {
  if (a.size() != d.size() || a.size() != types.size())
    throw ShapeMismatch("attention, distance and type list are indexed differently");
  FilteredMatrices out;
  out.kept = select_frequent(types, frequent_set);
  if (out.kept.empty()) throw EmptySelection("no token has a frequent type");
  out.attention = a.principal_submatrix(out.kept);
  out.distance = d.principal_submatrix(out.kept);
  return out;
}

}  // namespace catprobe
