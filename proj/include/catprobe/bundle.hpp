#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catprobe/matrix.hpp"
#include "catprobe/source.hpp"
#include "catprobe/uast.hpp"
#include "json.hpp"

namespace catprobe {

inline constexpr int kBundleFormatVersion = 1;
inline constexpr double kRowSumTolerance = 1e-3;

// One model-tokenizer unit. Special units (delimiters, padding) carry the
// empty span [0, 0).
struct SubtokenSpan {
  std::string text;
  std::uint32_t start = 0;
  std::uint32_t end = 0;
  bool special = false;

  friend bool operator==(const SubtokenSpan&, const SubtokenSpan&) = default;
};

// Raw attention for one sample, shape [layers][heads][s][s].
class AttentionTensor {
 public:
  AttentionTensor() = default;
  AttentionTensor(std::size_t layers, std::size_t heads, std::size_t seq);
  AttentionTensor(std::size_t layers, std::size_t heads, std::size_t seq, std::vector<float> values);

  std::size_t layers() const { return layers_; }
  std::size_t heads() const { return heads_; }
  std::size_t seq() const { return seq_; }

  float& at(std::size_t layer, std::size_t head, std::size_t row, std::size_t col) {
    return values_[offset(layer, head) + row * seq_ + col];
  }
  float at(std::size_t layer, std::size_t head, std::size_t row, std::size_t col) const {
    return values_[offset(layer, head) + row * seq_ + col];
  }

  // The s*s block of one head.
  std::span<const float> head(std::size_t layer, std::size_t head) const {
    return {values_.data() + offset(layer, head), seq_ * seq_};
  }
  std::span<float> head(std::size_t layer, std::size_t head) {
    return {values_.data() + offset(layer, head), seq_ * seq_};
  }

  std::span<const float> values() const { return values_; }

  friend bool operator==(const AttentionTensor&, const AttentionTensor&) = default;

 private:
  std::size_t offset(std::size_t layer, std::size_t head) const {
    return (layer * heads_ + head) * seq_ * seq_;
  }

  std::size_t layers_ = 0;
  std::size_t heads_ = 0;
  std::size_t seq_ = 0;
  std::vector<float> values_;
};

struct BundleSample {
  std::string id;
  Sha256Digest content_hash{};
  std::vector<SubtokenSpan> subtokens;
  AttentionTensor attention;
};

struct AttentionBundle {
  int format_version = kBundleFormatVersion;
  std::string model;
  Language language = Language::python;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::vector<BundleSample> samples;
  // Free-form provenance written by the extractor (checkpoint, tokenizer,
  // max length, ...). Passed through untouched.
  nlohmann::json metadata = nlohmann::json::object();
  // Soft problems found while loading, such as rows whose sum is off by more
  // than kRowSumTolerance. Not serialized.
  std::vector<std::string> warnings;

  const BundleSample* find(const Sha256Digest& hash) const;
};

// Throws FormatError, ShapeError or RangeError. Row-sum violations are kept
// and reported in `warnings`.
AttentionBundle load_bundle(const std::filesystem::path& path);
AttentionBundle parse_bundle(std::string_view json_text);

void save_bundle(const AttentionBundle& bundle, const std::filesystem::path& path);
std::string serialize_bundle(const AttentionBundle& bundle);

// Subtoken-to-token grouping for one sample.
struct Alignment {
  // Per subtoken: index into the LeafToken list, or nullopt for special
  // (and skipped whitespace) subtokens.
  std::vector<std::optional<std::size_t>> token_of;
  // LeafToken indices that received at least one subtoken, ascending. Row i
  // of every token-level matrix is token kept[i].
  std::vector<std::size_t> kept;
  // LeafToken indices that received none (truncated away).
  std::vector<std::size_t> dropped;

  // Position of each subtoken's token within `kept`, or nullopt.
  std::vector<std::optional<std::size_t>> row_of;
};

struct AlignOptions {
  // Leave subtokens that cover only whitespace unmapped instead of raising
  // AlignmentError. Needs the code bytes.
  bool skip_whitespace = false;
};

// Maximal byte overlap, ties to the earlier token. Throws AlignmentError when
// a non-special subtoken overlaps no token.
Alignment align_subtokens(std::span<const SubtokenSpan> subtokens, std::span<const LeafToken> tokens,
                          std::string_view code = {}, const AlignOptions& options = {});

// Mean of the subtoken block for every token pair (rows/cols in kept order).
AttentionMatrix aggregate_token_attention(std::span<const float> head_block, std::size_t seq,
                                          const Alignment& alignment);

// Element-wise mean over heads.
AttentionMatrix average_heads(std::span<const AttentionMatrix> heads);

// Token-level attention for every layer of a sample (heads averaged).
struct TokenAttention {
  std::string model;
  std::string sample_id;
  std::vector<AttentionMatrix> layers;

  std::size_t size() const { return layers.empty() ? 0 : layers.front().size(); }
};

// Aggregate every head of every layer, then average heads. (layer, head)
// pairs are processed in parallel.
TokenAttention token_attention(const BundleSample& sample, const Alignment& alignment,
                               std::string_view model = {});
TokenAttention token_attention_serial(const BundleSample& sample, const Alignment& alignment,
                                      std::string_view model = {});

}  // namespace catprobe
