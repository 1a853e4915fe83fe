#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace catprobe::codec {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws FormatError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Little-endian IEEE-754 binary32, in element order.
std::vector<std::uint8_t> pack_f32le(std::span<const float> values);
// Throws ShapeError if the byte count is not a multiple of 4.
std::vector<float> unpack_f32le(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> pack_u32le(std::span<const std::uint32_t> values);
std::vector<std::uint32_t> unpack_u32le(std::span<const std::uint8_t> bytes);

}  // namespace catprobe::codec
