#include "catprobe/codec.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>

#include "catprobe/errors.hpp"

namespace catprobe::codec {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  if (bytes.empty()) return out;
  const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                      static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.empty()) return {};
  if (text.size() % 4 != 0) throw FormatError("base64 payload length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int written = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                      static_cast<int>(text.size()));
  if (written < 0) throw FormatError("malformed base64 payload");
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(written) - pad);
  return out;
}

namespace {

template <typename T>
std::vector<std::uint8_t> pack_le(std::span<const T> values) {
  static_assert(sizeof(T) == 4);
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return out;
}

template <typename T>
std::vector<T> unpack_le(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) throw ShapeError("payload byte length is not a multiple of 4");
  std::vector<T> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    out[i] = std::bit_cast<T>(bits);
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> pack_f32le(std::span<const float> values) { return pack_le(values); }
std::vector<float> unpack_f32le(std::span<const std::uint8_t> bytes) { return unpack_le<float>(bytes); }
std::vector<std::uint8_t> pack_u32le(std::span<const std::uint32_t> values) { return pack_le(values); }
std::vector<std::uint32_t> unpack_u32le(std::span<const std::uint8_t> bytes) {
  return unpack_le<std::uint32_t>(bytes);
}

}  // namespace catprobe::codec
