#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace catprobe {

enum class Language { go, java, javascript, python };

std::string_view to_string(Language lang);

// Throws UnsupportedLanguage for anything but the four canonical names.
Language parse_language(std::string_view name);

// Maps a file extension (".py", ".java", ".js", ".go") to its language.
std::optional<Language> language_from_extension(std::string_view ext);

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::string_view bytes);
std::string to_hex(const Sha256Digest& digest);

// One code sample. `code` must be valid UTF-8; `content_hash` is always the
// SHA-256 of `code`, so construct through make_source_unit().
struct SourceUnit {
  std::string id;
  Language language = Language::python;
  std::string code;
  Sha256Digest content_hash{};

  std::string hash_hex() const { return to_hex(content_hash); }
};

// Validates UTF-8 (throws FormatError) and fills in the content hash.
SourceUnit make_source_unit(std::string id, Language language, std::string code);

bool is_valid_utf8(std::string_view bytes);

}  // namespace catprobe
