// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian primitive encoding shared by the volume and checkpoint
// formats.

#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "aftunet/errors.hpp"

namespace aft::binio {

template <typename UInt>
void put_uint(std::ostream& os, UInt v) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  os.write(bytes, sizeof(UInt));
}

inline void put_f32(std::ostream& os, float v) { put_uint(os, std::bit_cast<std::uint32_t>(v)); }

template <typename UInt>
UInt get_uint(std::istream& is, const char* what) {
  unsigned char bytes[sizeof(UInt)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) {
    throw FormatError(std::string("truncated input while reading ") + what);
  }
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

inline float get_f32(std::istream& is, const char* what) {
  return std::bit_cast<float>(get_uint<std::uint32_t>(is, what));
}

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char got[4] = {};
  if (!is.read(got, 4)) throw FormatError("truncated input while reading magic");
  for (int i = 0; i < 4; ++i) {
    if (got[i] != magic[i]) {
      throw FormatError(std::string("bad magic, expected ") + magic);
    }
  }
}

}  // namespace aft::binio
