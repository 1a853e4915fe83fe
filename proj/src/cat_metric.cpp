#include "catprobe/cat_metric.hpp"

#include "catprobe/errors.hpp"

namespace catprobe {

PairCounts sample_counts(const AttentionMatrix& a, const DistanceMatrix& d, float theta_a, std::uint32_t theta_d,
                         bool include_diagonal) {
  if (a.size() != d.size()) throw ShapeMismatch("attention and distance matrices differ in size");
  if (a.empty()) throw EmptyInput("sample_counts on an empty matrix");
  const auto n = a.size();
  PairCounts c;
  for (std::size_t i = 0; i < n; ++i) {
    const auto arow = a.row(i);
    const auto drow = d.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j && !include_diagonal) continue;
      const bool hot = arow[j] > theta_a;
      const bool near = drow[j] < theta_d;
      c.matched += hot && near;
      c.union_ += hot || near;
    }
  }
  return c;
}

double cat_score(const PairCounts& total) {
  if (total.union_ == 0) throw EmptyUnion("no cell satisfies either threshold");
  return static_cast<double>(total.matched) / static_cast<double>(total.union_);
}

double corpus_cat_score(std::span<const PairCounts> samples) {
  PairCounts total;
  for (const auto& s : samples) total += s;
  return cat_score(total);
}

PairCounts corpus_counts_serial(std::span<const ScoredPair> pairs, bool include_diagonal) {
  PairCounts total;
  for (const auto& p : pairs) total += sample_counts(*p.attention, *p.distance, p.theta_a, p.theta_d, include_diagonal);
  return total;
}

PairCounts corpus_counts(std::span<const ScoredPair> pairs, bool include_diagonal) {
  // Shape errors must surface here, not inside the parallel region.
  for (const auto& p : pairs) {
    if (p.attention->size() != p.distance->size()) throw ShapeMismatch("attention and distance matrices differ in size");
    if (p.attention->empty()) throw EmptyInput("sample_counts on an empty matrix");
  }
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
  std::uint64_t matched = 0;
  std::uint64_t union_ = 0;
#pragma omp parallel for schedule(dynamic, 8) reduction(+ : matched, union_) if (n > 16)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto& p = pairs[static_cast<std::size_t>(k)];
    const auto c = sample_counts(*p.attention, *p.distance, p.theta_a, p.theta_d, include_diagonal);
    matched += c.matched;
    union_ += c.union_;
  }
  return {matched, union_};
}

}  // namespace catprobe
