#pragma once

// Little-endian encode/decode helpers shared by the STL codec and the array
// container. Byte order is explicit so files are portable across hosts.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>

namespace domino::io {

template <typename UInt>
inline UInt load_le(const unsigned char* p) {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(p[i]) << (8 * i);
  return v;
}

template <typename UInt>
inline void store_le(std::string& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline float load_f32(const unsigned char* p) { return std::bit_cast<float>(load_le<std::uint32_t>(p)); }
inline double load_f64(const unsigned char* p) { return std::bit_cast<double>(load_le<std::uint64_t>(p)); }
inline void store_f32(std::string& out, float v) { store_le(out, std::bit_cast<std::uint32_t>(v)); }
inline void store_f64(std::string& out, double v) { store_le(out, std::bit_cast<std::uint64_t>(v)); }

}  // namespace domino::io
