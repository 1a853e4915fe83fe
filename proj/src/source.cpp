#include "catprobe/source.hpp"

#include <openssl/evp.h>

#include "catprobe/errors.hpp"

namespace catprobe {

std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::go: return "go";
    case Language::java: return "java";
    case Language::javascript: return "javascript";
    case Language::python: return "python";
  }
  return "unknown";
}

Language parse_language(std::string_view name) {
  if (name == "go") return Language::go;
  if (name == "java") return Language::java;
  if (name == "javascript" || name == "js") return Language::javascript;
  if (name == "python" || name == "py") return Language::python;
  throw UnsupportedLanguage("unsupported language: " + std::string(name));
}

std::optional<Language> language_from_extension(std::string_view ext) {
  if (ext == ".go") return Language::go;
  if (ext == ".java") return Language::java;
  if (ext == ".js" || ext == ".mjs" || ext == ".cjs") return Language::javascript;
  if (ext == ".py") return Language::python;
  return std::nullopt;
}

Sha256Digest sha256(std::string_view bytes) {
  Sha256Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    throw Error("SHA-256 digest failed");
  return out;
}

std::string to_hex(const Sha256Digest& digest) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(digest.size() * 2);
  for (auto b : digest) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  const auto n = bytes.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      extra = 1;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      extra = 2;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= n) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // Overlong forms, surrogates, and values past U+10FFFF.
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
    i += extra + 1;
  }
  return true;
}

SourceUnit make_source_unit(std::string id, Language language, std::string code) {
  if (!is_valid_utf8(code)) throw FormatError("sample " + id + " is not valid UTF-8");
  SourceUnit unit;
  unit.id = std::move(id);
  unit.language = language;
  unit.content_hash = sha256(code);
  unit.code = std::move(code);
  return unit;
}

}  // namespace catprobe
