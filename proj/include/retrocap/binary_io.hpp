#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <type_traits>
#include <vector>

#include "retrocap/errors.hpp"

// Little-endian helpers for the embedding and checkpoint formats.
namespace retrocap::binary {

template <typename T>
T byteswap_if_big(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  value = byteswap_if_big(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("unexpected end of binary stream");
  return byteswap_if_big(value);
}

inline void write_f32_array(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float v : values) write_le(out, v);
  }
}

inline std::vector<float> read_f32_array(std::istream& in, std::size_t count) {
  std::vector<float> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw FormatError("truncated float32 payload");
  if constexpr (std::endian::native == std::endian::big) {
    for (float& v : values) v = byteswap_if_big(v);
  }
  return values;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::size_t max_size = std::size_t{1} << 30) {
  const auto size = read_le<std::uint32_t>(in);
  if (size > max_size) throw FormatError("string length exceeds limit");
  std::string s(size, '\0');
  in.read(s.data(), size);
  if (!in) throw FormatError("truncated string");
  return s;
}

}  // namespace retrocap::binary
