#pragma once

// Synthetic attention bundles built against parsed corpus samples.

#include <functional>
#include <string>
#include <vector>

#include "catprobe/bundle.hpp"
#include "catprobe/probe.hpp"

namespace catprobe::testing {

// Unnormalized token-level weight w(sample, layer, i, j) >= 0 on LeafToken
// indices.
using TokenWeight = std::function<double(const CorpusSample&, std::size_t layer, std::size_t i, std::size_t j)>;

struct SynthOptions {
  std::size_t layers = 1;
  std::size_t heads = 1;
  // Split every token of two or more bytes into two subtokens.
  bool split = false;
  // Add <s> ... </s> delimiters.
  bool specials = false;
  // Keep only the first `max_subtokens` subtokens (including <s>); 0 = all.
  std::size_t max_subtokens = 0;
};

// Subtoken rows are softmax-like: every non-special row sums to 1 and the
// token-level support equals the support of w.
inline BundleSample synth_sample(const CorpusSample& cs, const TokenWeight& weight, const SynthOptions& opt) {
  BundleSample out;
  out.id = cs.unit.id;
  out.content_hash = cs.unit.content_hash;
  std::vector<std::optional<std::size_t>> tok;
  if (opt.specials) {
    out.subtokens.push_back({"<s>", 0, 0, true});
    tok.push_back(std::nullopt);
  }
  for (const auto& t : cs.tokens) {
    if (opt.split && t.span.size() >= 2) {
      const auto mid = t.span.start + t.span.size() / 2;
      out.subtokens.push_back({cs.unit.code.substr(t.span.start, mid - t.span.start), t.span.start, mid, false});
      out.subtokens.push_back({cs.unit.code.substr(mid, t.span.end - mid), mid, t.span.end, false});
      tok.push_back(t.index);
      tok.push_back(t.index);
    } else {
      out.subtokens.push_back({t.text, t.span.start, t.span.end, false});
      tok.push_back(t.index);
    }
  }
  if (opt.max_subtokens != 0 && out.subtokens.size() > opt.max_subtokens) {
    out.subtokens.resize(opt.max_subtokens);
    tok.resize(opt.max_subtokens);
  }
  if (opt.specials) {
    out.subtokens.push_back({"</s>", 0, 0, true});
    tok.push_back(std::nullopt);
  }

  const auto s = out.subtokens.size();
  out.attention = AttentionTensor(opt.layers, opt.heads, s);
  for (std::size_t l = 0; l < opt.layers; ++l)
    for (std::size_t h = 0; h < opt.heads; ++h)
      for (std::size_t a = 0; a < s; ++a) {
        if (!tok[a]) {
          for (std::size_t b = 0; b < s; ++b) out.attention.at(l, h, a, b) = static_cast<float>(1.0 / s);
          continue;
        }
        double z = 0.0;
        for (std::size_t b = 0; b < s; ++b)
          if (tok[b]) z += weight(cs, l, *tok[a], *tok[b]);
        for (std::size_t b = 0; b < s; ++b)
          out.attention.at(l, h, a, b) = tok[b] && z > 0 ? static_cast<float>(weight(cs, l, *tok[a], *tok[b]) / z) : 0.0f;
      }
  return out;
}

inline AttentionBundle synth_bundle(const Corpus& corpus, const std::string& model, Language lang,
                                    const TokenWeight& weight, const SynthOptions& opt) {
  AttentionBundle b;
  b.model = model;
  b.language = lang;
  b.num_layers = opt.layers;
  b.num_heads = opt.heads;
  b.metadata = {{"checkpoint", "synthetic"}};
  for (const auto& cs : corpus.samples)
    if (cs.unit.language == lang) b.samples.push_back(synth_sample(cs, weight, opt));
  return b;
}

}  // namespace catprobe::testing
