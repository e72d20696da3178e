#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vc {

// Packs fp32 values as little-endian bytes regardless of host order.
inline std::string floats_to_le_bytes(std::span<const float> values) {
  std::string out(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  return out;
}

inline std::vector<float> le_bytes_to_floats(std::string_view bytes) {
  if (bytes.size() % 4 != 0) throw std::invalid_argument("fp32 byte stream length not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

inline std::string doubles_to_le_bytes(std::span<const double> values) {
  std::string out(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  return out;
}

inline std::vector<double> le_bytes_to_doubles(std::string_view bytes) {
  if (bytes.size() % 8 != 0) throw std::invalid_argument("fp64 byte stream length not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

inline std::uint32_t read_be_u32(std::string_view bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw std::out_of_range("read past end of buffer");
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v = (v << 8) | static_cast<unsigned char>(bytes[offset + b]);
  return v;
}

inline void append_be_u32(std::string& out, std::uint32_t v) {
  for (int b = 3; b >= 0; --b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

}  // namespace vc
