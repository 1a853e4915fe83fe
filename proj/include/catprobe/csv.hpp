#pragma once

#include <charconv>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "catprobe/matrix.hpp"

namespace catprobe::csv {

// RFC 4180 quoting: fields with separators, quotes or line breaks are quoted
// and inner quotes doubled.
inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos && !field.starts_with('#') &&
      !field.starts_with(' ') && !field.ends_with(' '))
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Shortest representation that reads back to the same value.
template <typename T>
std::string format_number(T value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// Square matrix with labels as the header row and first column. Labels
// default to 0..n-1.
template <typename T>
void write_matrix(std::ostream& out, const SquareMatrix<T>& m, std::span<const std::string> labels = {}) {
  const auto n = m.size();
  auto label = [&](std::size_t i) { return labels.empty() ? std::to_string(i) : escape(labels[i]); };
  out << "token";
  for (std::size_t j = 0; j < n; ++j) out << ',' << label(j);
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << label(i);
    for (std::size_t j = 0; j < n; ++j) out << ',' << format_number(m(i, j));
    out << '\n';
  }
}

}  // namespace catprobe::csv
