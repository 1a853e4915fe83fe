#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "catprobe/matrix.hpp"

namespace catprobe {

struct PairCounts {
  std::uint64_t matched = 0;  // A > theta_a and D < theta_d
  std::uint64_t union_ = 0;   // A > theta_a or  D < theta_d

  PairCounts& operator+=(const PairCounts& other) {
    matched += other.matched;
    union_ += other.union_;
    return *this;
  }
  friend PairCounts operator+(PairCounts a, const PairCounts& b) { return a += b; }
  friend bool operator==(const PairCounts&, const PairCounts&) = default;
};

// Counts over all ordered pairs (i, j); the diagonal is skipped when
// include_diagonal is false. Throws ShapeMismatch on differing sizes and
// EmptyInput on 0x0 matrices.
PairCounts sample_counts(const AttentionMatrix& a, const DistanceMatrix& d, float theta_a,
                         std::uint32_t theta_d, bool include_diagonal = true);

// Σ matched / Σ union. Throws EmptyUnion when Σ union is zero.
double corpus_cat_score(std::span<const PairCounts> samples);
double cat_score(const PairCounts& total);

// One sample's inputs to a corpus-level count.
struct ScoredPair {
  const AttentionMatrix* attention = nullptr;
  const DistanceMatrix* distance = nullptr;
  float theta_a = 0.0f;
  std::uint32_t theta_d = 1;
};

// Sum of sample_counts over every pair; samples reduced in parallel.
PairCounts corpus_counts(std::span<const ScoredPair> pairs, bool include_diagonal = true);
PairCounts corpus_counts_serial(std::span<const ScoredPair> pairs, bool include_diagonal = true);

struct LayerScore {
  std::size_t layer = 0;
  PairCounts counts;
  // Same layer under the opposite diagonal policy, for side-by-side reports.
  PairCounts counts_alt_diagonal;
  double score = 0.0;
  double score_alt_diagonal = 0.0;
  // No cell met either threshold at this layer; score is reported as 0.
  bool empty_union = false;
};

struct SkippedSample {
  std::string id;
  std::string reason;
};

struct CatScoreResult {
  std::string model;
  std::string language;
  std::vector<LayerScore> per_layer;
  std::size_t sample_count = 0;
  std::vector<SkippedSample> skipped;
  bool include_diagonal = true;

  // The last layer's score.
  double headline() const { return per_layer.empty() ? 0.0 : per_layer.back().score; }
};

}  // namespace catprobe
