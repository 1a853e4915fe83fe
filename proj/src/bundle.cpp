#include "catprobe/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "catprobe/codec.hpp"
#include "catprobe/errors.hpp"

namespace catprobe {

using nlohmann::json;

AttentionTensor::AttentionTensor(std::size_t layers, std::size_t heads, std::size_t seq)
    : layers_(layers), heads_(heads), seq_(seq), values_(layers * heads * seq * seq, 0.0f) {}

AttentionTensor::AttentionTensor(std::size_t layers, std::size_t heads, std::size_t seq, std::vector<float> values)
    : layers_(layers), heads_(heads), seq_(seq), values_(std::move(values)) {
  if (values_.size() != layers * heads * seq * seq)
    throw ShapeError("attention tensor holds " + std::to_string(values_.size()) + " values, expected L*H*s*s = " +
                     std::to_string(layers * heads * seq * seq));
}

const BundleSample* AttentionBundle::find(const Sha256Digest& hash) const {
  for (const auto& s : samples)
    if (s.content_hash == hash) return &s;
  return nullptr;
}

namespace {

Sha256Digest parse_hash(const std::string& hex) {
  if (hex.size() != 64) throw FormatError("content_hash must be 64 hex characters");
  Sha256Digest out{};
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw FormatError("content_hash is not hexadecimal");
  };
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return out;
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw FormatError(where + ": field '" + key + "' has the wrong type");
  }
}

SubtokenSpan parse_subtoken(const json& j, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": subtoken is not an object");
  SubtokenSpan s;
  s.text = required<std::string>(j, "text", where);
  s.start = required<std::uint32_t>(j, "start", where);
  s.end = required<std::uint32_t>(j, "end", where);
  s.special = required<bool>(j, "special", where);
  if (s.special ? (s.start != 0 || s.end != 0) : s.start >= s.end)
    throw FormatError(where + ": subtoken '" + s.text + "' has an invalid span");
  return s;
}

void validate_tensor(const AttentionTensor& t, const std::vector<SubtokenSpan>& subtokens, const std::string& where,
                     std::vector<std::string>& warnings) {
  for (float v : t.values())
    if (!(v >= 0.0f && v <= 1.0f)) throw RangeError(where + ": attention value outside [0, 1]");
  const auto s = t.seq();
  std::size_t bad_rows = 0;
  double worst = 0.0;
  for (std::size_t l = 0; l < t.layers(); ++l)
    for (std::size_t h = 0; h < t.heads(); ++h)
      for (std::size_t r = 0; r < s; ++r) {
        if (subtokens[r].special) continue;
        double sum = 0.0;
        for (std::size_t c = 0; c < s; ++c) sum += t.at(l, h, r, c);
        const double dev = std::abs(sum - 1.0);
        if (dev > kRowSumTolerance) {
          ++bad_rows;
          worst = std::max(worst, dev);
        }
      }
  if (bad_rows > 0)
    warnings.push_back(where + ": " + std::to_string(bad_rows) + " attention rows deviate from sum 1 (worst by " +
                       std::to_string(worst) + ")");
}

}  // namespace

AttentionBundle parse_bundle(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("bundle is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("bundle envelope is not a JSON object");

  AttentionBundle b;
  b.format_version = required<int>(doc, "format_version", "bundle");
  if (b.format_version != kBundleFormatVersion)
    throw FormatError("unsupported bundle format_version " + std::to_string(b.format_version));
  b.model = required<std::string>(doc, "model", "bundle");
  try {
    b.language = parse_language(required<std::string>(doc, "language", "bundle"));
  } catch (const UnsupportedLanguage& e) {
    throw FormatError(std::string("bundle: ") + e.what());
  }
  b.num_layers = required<std::size_t>(doc, "num_layers", "bundle");
  b.num_heads = required<std::size_t>(doc, "num_heads", "bundle");
  if (b.num_layers == 0 || b.num_heads == 0) throw FormatError("bundle: num_layers and num_heads must be positive");
  if (auto it = doc.find("metadata"); it != doc.end()) {
    if (!it->is_object()) throw FormatError("bundle: metadata must be an object");
    b.metadata = *it;
  }

  const auto samples = doc.find("samples");
  if (samples == doc.end() || !samples->is_array()) throw FormatError("bundle: 'samples' must be an array");
  b.samples.reserve(samples->size());
  for (std::size_t k = 0; k < samples->size(); ++k) {
    const json& js = (*samples)[k];
    std::string where = "sample #" + std::to_string(k);
    if (!js.is_object()) throw FormatError(where + " is not an object");
    BundleSample sample;
    sample.id = required<std::string>(js, "id", where);
    where = "sample '" + sample.id + "'";
    sample.content_hash = parse_hash(required<std::string>(js, "content_hash", where));
    const auto subs = js.find("subtokens");
    if (subs == js.end() || !subs->is_array()) throw FormatError(where + ": 'subtokens' must be an array");
    for (const auto& st : *subs) sample.subtokens.push_back(parse_subtoken(st, where));

    const auto payload = codec::base64_decode(required<std::string>(js, "attention_b64", where));
    const auto s = sample.subtokens.size();
    const auto expected = b.num_layers * b.num_heads * s * s * sizeof(float);
    if (payload.size() != expected)
      throw ShapeError(where + ": attention payload has " + std::to_string(payload.size()) + " bytes, expected " +
                       std::to_string(expected));
    sample.attention = AttentionTensor(b.num_layers, b.num_heads, s, codec::unpack_f32le(payload));
    validate_tensor(sample.attention, sample.subtokens, where, b.warnings);
    b.samples.push_back(std::move(sample));
  }
  return b;
}

AttentionBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open bundle " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_bundle(buf.str());
}

std::string serialize_bundle(const AttentionBundle& bundle) {
  json doc;
  doc["format_version"] = bundle.format_version;
  doc["model"] = bundle.model;
  doc["language"] = std::string(to_string(bundle.language));
  doc["num_layers"] = bundle.num_layers;
  doc["num_heads"] = bundle.num_heads;
  doc["metadata"] = bundle.metadata;
  json samples = json::array();
  for (const auto& s : bundle.samples) {
    json js;
    js["id"] = s.id;
    js["content_hash"] = to_hex(s.content_hash);
    json subs = json::array();
    for (const auto& st : s.subtokens)
      subs.push_back({{"text", st.text}, {"start", st.start}, {"end", st.end}, {"special", st.special}});
    js["subtokens"] = std::move(subs);
    js["attention_b64"] = codec::base64_encode(codec::pack_f32le(s.attention.values()));
    samples.push_back(std::move(js));
  }
  doc["samples"] = std::move(samples);
  return doc.dump(1) + "\n";
}

void save_bundle(const AttentionBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write bundle " + path.string());
  out << serialize_bundle(bundle);
  if (!out) throw FormatError("short write on bundle " + path.string());
}

Alignment align_subtokens(std::span<const SubtokenSpan> subtokens, std::span<const LeafToken> tokens,
                          std::string_view code, const AlignOptions& options) {
  Alignment out;
  out.token_of.assign(subtokens.size(), std::nullopt);
  std::vector<bool> hit(tokens.size(), false);

  for (std::size_t k = 0; k < subtokens.size(); ++k) {
    const auto& st = subtokens[k];
    if (st.special) continue;
    // First token ending after the subtoken starts; tokens are sorted and disjoint.
    auto it = std::partition_point(tokens.begin(), tokens.end(),
                                   [&](const LeafToken& t) { return t.span.end <= st.start; });
    std::optional<std::size_t> best;
    std::uint32_t best_overlap = 0;
    for (; it != tokens.end() && it->span.start < st.end; ++it) {
      const auto overlap = std::min(it->span.end, st.end) - std::max(it->span.start, st.start);
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = static_cast<std::size_t>(it - tokens.begin());
      }
    }
    if (!best) {
      if (options.skip_whitespace && st.end <= code.size()) {
        const auto bytes = code.substr(st.start, st.end - st.start);
        if (bytes.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos) continue;
      }
      throw AlignmentError("subtoken '" + st.text + "' at [" + std::to_string(st.start) + ", " +
                           std::to_string(st.end) + ") overlaps no token");
    }
    out.token_of[k] = best;
    hit[*best] = true;
  }

  std::vector<std::optional<std::size_t>> position(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (hit[t]) {
      position[t] = out.kept.size();
      out.kept.push_back(t);
    } else {
      out.dropped.push_back(t);
    }
  }
  out.row_of.resize(subtokens.size());
  for (std::size_t k = 0; k < subtokens.size(); ++k)
    if (out.token_of[k]) out.row_of[k] = position[*out.token_of[k]];
  return out;
}

AttentionMatrix aggregate_token_attention(std::span<const float> head_block, std::size_t seq,
                                          const Alignment& alignment) {
  if (head_block.size() != seq * seq || alignment.row_of.size() != seq)
    throw ShapeMismatch("alignment does not match the attention block");
  const auto n = alignment.kept.size();
  std::vector<double> sums(n * n, 0.0);
  std::vector<std::size_t> members(n, 0);
  for (const auto& r : alignment.row_of)
    if (r) ++members[*r];

  for (std::size_t a = 0; a < seq; ++a) {
    const auto ra = alignment.row_of[a];
    if (!ra) continue;
    double* dst = sums.data() + *ra * n;
    const float* src = head_block.data() + a * seq;
    for (std::size_t b = 0; b < seq; ++b)
      if (const auto rb = alignment.row_of[b]) dst[*rb] += src[b];
  }

  AttentionMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = static_cast<float>(sums[i * n + j] / static_cast<double>(members[i] * members[j]));
  return out;
}

AttentionMatrix average_heads(std::span<const AttentionMatrix> heads) {
  if (heads.empty()) throw EmptyInput("average_heads needs at least one head");
  const auto n = heads.front().size();
  for (const auto& h : heads)
    if (h.size() != n) throw ShapeMismatch("head matrices differ in size");
  std::vector<double> sums(n * n, 0.0);
  for (const auto& h : heads) {
    const auto cells = h.cells();
    for (std::size_t c = 0; c < cells.size(); ++c) sums[c] += cells[c];
  }
  AttentionMatrix out(n);
  const auto count = static_cast<double>(heads.size());
  auto cells = out.cells();
  for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = static_cast<float>(sums[c] / count);
  return out;
}

namespace {

void check_sample(const BundleSample& sample, const Alignment& alignment) {
  if (alignment.row_of.size() != sample.subtokens.size())
    throw ShapeMismatch("sample '" + sample.id + "': alignment covers " + std::to_string(alignment.row_of.size()) +
                        " subtokens, sample has " + std::to_string(sample.subtokens.size()));
}

TokenAttention finish(const BundleSample& sample, std::string_view model,
                      std::vector<AttentionMatrix>& per_head) {
  const auto& t = sample.attention;
  TokenAttention out;
  out.model = std::string(model);
  out.sample_id = sample.id;
  out.layers.reserve(t.layers());
  for (std::size_t l = 0; l < t.layers(); ++l)
    out.layers.push_back(average_heads(std::span(per_head).subspan(l * t.heads(), t.heads())));
  return out;
}

}  // namespace

TokenAttention token_attention_serial(const BundleSample& sample, const Alignment& alignment,
                                      std::string_view model) {
  check_sample(sample, alignment);
  const auto& t = sample.attention;
  std::vector<AttentionMatrix> per_head;
  per_head.reserve(t.layers() * t.heads());
  for (std::size_t l = 0; l < t.layers(); ++l)
    for (std::size_t h = 0; h < t.heads(); ++h)
      per_head.push_back(aggregate_token_attention(t.head(l, h), t.seq(), alignment));
  return finish(sample, model, per_head);
}

TokenAttention token_attention(const BundleSample& sample, const Alignment& alignment, std::string_view model) {
  check_sample(sample, alignment);
  const auto& t = sample.attention;
  const auto blocks = static_cast<std::ptrdiff_t>(t.layers() * t.heads());
  std::vector<AttentionMatrix> per_head(static_cast<std::size_t>(blocks));
#pragma omp parallel for schedule(static) if (blocks > 1 && t.seq() > 32)
  for (std::ptrdiff_t k = 0; k < blocks; ++k) {
    const auto l = static_cast<std::size_t>(k) / t.heads();
    const auto h = static_cast<std::size_t>(k) % t.heads();
    per_head[static_cast<std::size_t>(k)] = aggregate_token_attention(t.head(l, h), t.seq(), alignment);
  }
  return finish(sample, model, per_head);
}

}  // namespace catprobe
