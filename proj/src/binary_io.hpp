// SPDX-License-Identifier: Apache-2.0
// Little-endian primitives shared by the grid and checkpoint formats.
#pragma once

#include "voxgen/errors.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace voxgen::detail {

template <typename U>
void put_le(std::ostream& os, U value) {
  static_assert(std::is_unsigned_v<U>);
  std::array<char, sizeof(U)> buf{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  }
  os.write(buf.data(), buf.size());
}

inline void put_f32(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }

/// Counts consumed bytes so truncation errors can report offsets.
class LeReader {
 public:
  LeReader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  template <typename U>
  U get() {
    std::array<unsigned char, sizeof(U)> buf{};
    read_raw(reinterpret_cast<char*>(buf.data()), buf.size());
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  void read_raw(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(is_.gcount());
    offset_ += got;
    if (got != n) {
      throw FormatError(what_ + " truncated at byte " + std::to_string(offset_) + ": needed " +
                        std::to_string(n) + " more bytes, got " + std::to_string(got));
    }
  }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::istream& is_;
  std::string what_;
  std::size_t offset_ = 0;
};

}  // namespace voxgen::detail
