#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "catprobe/errors.hpp"
#include "catprobe/matrix.hpp"

namespace catprobe {

inline constexpr double kAttentionQuantile = 0.75;
inline constexpr double kDistanceQuantile = 0.25;
inline constexpr int kDefaultPerModelCutoff = 10;

// Nearest-rank quantile: the ceil(q*N)-th smallest value (1-based).
template <typename T>
T quartile(std::span<const T> values, double q) {
  if (values.empty()) throw EmptyInput("quartile of an empty list");
  if (!(q > 0.0 && q < 1.0)) throw RangeError("quantile fraction must be in (0, 1)");
  const auto n = values.size();
  // The epsilon keeps exact products such as 0.1 * 30 from rounding up a rank.
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::vector<T> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  return sorted[rank - 1];
}

enum class ThresholdScope { per_sample, per_corpus };

struct Thresholds {
  float theta_a = 0.0f;
  std::uint32_t theta_d = 1;
  ThresholdScope scope = ThresholdScope::per_sample;
};

// Third quartile of every cell of A.
float attention_threshold(const AttentionMatrix& a);
// First quartile of every cell of D, floored at 1.
std::uint32_t distance_threshold(const DistanceMatrix& d);

// Which cells count as "type t" when measuring a type's confidence.
enum class MaskSemantics { column, row, either };

// Fraction of type-t cells whose attention exceeds theta_a. Throws
// TypeAbsent when no token has type t.
double type_confidence(const AttentionMatrix& a, std::span<const std::string> types, float theta_a,
                       const std::string& type, MaskSemantics semantics = MaskSemantics::column);

struct TypeConfidence {
  std::string model;
  std::string type_label;
  double confidence = 0.0;
  std::size_t sample_count = 0;
};

// Input of one sample to confidence accumulation.
struct ConfidenceSample {
  const AttentionMatrix* attention = nullptr;
  std::span<const std::string> types;
  float theta_a = 0.0f;
};

// Per-type mean confidence over the samples in which the type occurs.
// Samples are reduced in parallel.
std::map<std::string, TypeConfidence> model_confidences(const std::string& model,
                                                        std::span<const ConfidenceSample> samples,
                                                        MaskSemantics semantics = MaskSemantics::column);
std::map<std::string, TypeConfidence> model_confidences_serial(const std::string& model,
                                                               std::span<const ConfidenceSample> samples,
                                                               MaskSemantics semantics = MaskSemantics::column);

struct TypeRanking {
  std::vector<std::string> models;
  // rank[model][type], 1 = highest confidence.
  std::map<std::string, std::map<std::string, int>> ranks;
  std::map<std::string, int> rank_sum;
  std::set<std::string> frequent_set;
  int per_model_cutoff = kDefaultPerModelCutoff;
  int cutoff = 0;
  std::vector<std::string> warnings;

  // Types ordered by rank_sum, ties lexicographic.
  std::vector<std::string> ordered_types() const;
};

// Ranks types within each model (descending confidence, ties by label) and
// keeps those whose rank sum is strictly below per_model_cutoff * M. Models
// that disagree on the type set are reduced to the intersection, with a
// warning.
TypeRanking rank_types(std::span<const std::map<std::string, TypeConfidence>> per_model,
                       int per_model_cutoff = kDefaultPerModelCutoff);

struct FilteredMatrices {
  AttentionMatrix attention;
  DistanceMatrix distance;
  std::vector<std::size_t> kept;
};

// Principal submatrices on the tokens whose type is frequent. Throws
// EmptySelection when nothing survives.
FilteredMatrices filter_matrices(const AttentionMatrix& a, const DistanceMatrix& d,
                                 std::span<const std::string> types, const std::set<std::string>& frequent_set);

std::vector<std::size_t> select_frequent(std::span<const std::string> types,
                                         const std::set<std::string>& frequent_set);

}  // namespace catprobe
