#pragma once

// Little-endian primitives shared by the binary file formats
// (feature stores, PCA models, serialized classifiers).

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "qrel/error.hpp"

namespace qrel::bin {

template <typename UInt>
void put_uint(std::ostream& os, UInt value) {
  std::array<char, sizeof(UInt)> buf{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  os.write(buf.data(), buf.size());
}

inline void put_u16(std::ostream& os, std::uint16_t v) { put_uint(os, v); }
inline void put_u32(std::ostream& os, std::uint32_t v) { put_uint(os, v); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put_uint(os, v); }
inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

// Length-prefixed (u16) UTF-8 string.
inline void put_str16(std::ostream& os, std::string_view s) {
  if (s.size() > 0xFFFF) fail(ErrorCode::invalid_argument, "string too long for u16 length prefix");
  put_u16(os, static_cast<std::uint16_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

// Length-prefixed (u32) string.
inline void put_str32(std::ostream& os, std::string_view s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& is, std::string context) : is_(is), context_(std::move(context)) {}

  void read_exact(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      fail(ErrorCode::truncated, context_ + ": unexpected end of file");
    }
  }

  template <typename UInt>
  UInt uint() {
    std::array<unsigned char, sizeof(UInt)> buf{};
    read_exact(reinterpret_cast<char*>(buf.data()), buf.size());
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
    return v;
  }

  std::uint16_t u16() { return uint<std::uint16_t>(); }
  std::uint32_t u32() { return uint<std::uint32_t>(); }
  std::uint64_t u64() { return uint<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  void expect_magic(std::string_view magic) {
    std::string got(magic.size(), '\0');
    is_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (static_cast<std::size_t>(is_.gcount()) != magic.size() || got != magic) {
      fail(ErrorCode::bad_magic, context_ + ": expected magic '" + std::string(magic) + "'");
    }
  }

  std::string str16() {
    std::string s(u16(), '\0');
    read_exact(s.data(), s.size());
    return s;
  }

  std::string str32() {
    std::string s(u32(), '\0');
    read_exact(s.data(), s.size());
    return s;
  }

  bool at_eof() { return is_.peek() == std::char_traits<char>::eof(); }

  const std::string& context() const { return context_; }

 private:
  std::istream& is_;
  std::string context_;
};

}  // namespace qrel::bin
