// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/tensor_file.hpp"

#include <fstream>
#include <limits>

#include "aftunet/binary_io.hpp"
#include "aftunet/errors.hpp"

namespace aft {

void write_tensor_file(std::ostream& os, const std::vector<NamedTensor>& entries) {
  os.write("AFTC", 4);
  binio::put_uint<std::uint32_t>(os, kTensorFileVersion);
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw FormatError("tensor name too long: " + e.name);
    }
    if (e.shape.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw FormatError("tensor rank too large: " + e.name);
    }
    if (shape_numel(e.shape) != static_cast<std::int64_t>(e.values.size())) {
      throw FormatError("tensor " + e.name + " has inconsistent extents");
    }
    binio::put_uint<std::uint16_t>(os, static_cast<std::uint16_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    binio::put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(e.shape.size()));
    for (auto extent : e.shape) {
      if (extent < 0 || extent > std::numeric_limits<std::uint32_t>::max()) {
        throw FormatError("tensor extent out of range: " + e.name);
      }
      binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(extent));
    }
    for (float v : e.values) binio::put_f32(os, v);
  }
  if (!os) throw FormatError("write failed");
}

std::vector<NamedTensor> read_tensor_file(std::istream& is) {
  binio::expect_magic(is, "AFTC");
  const auto version = binio::get_uint<std::uint32_t>(is, "version");
  if (version != kTensorFileVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = binio::get_uint<std::uint32_t>(is, "entry count");
  std::vector<NamedTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor e;
    const auto len = binio::get_uint<std::uint16_t>(is, "name length");
    e.name.resize(len);
    if (!is.read(e.name.data(), len)) throw FormatError("truncated input while reading name");
    const auto rank = binio::get_uint<std::uint8_t>(is, "rank");
    for (std::uint8_t r = 0; r < rank; ++r) {
      e.shape.push_back(binio::get_uint<std::uint32_t>(is, "extent"));
    }
    const auto n = shape_numel(e.shape);
    e.values.resize(static_cast<std::size_t>(n));
    for (auto& v : e.values) v = binio::get_f32(is, "tensor payload");
    entries.push_back(std::move(e));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after last tensor");
  }
  return entries;
}

void write_tensor_file(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  write_tensor_file(os, entries);
}

std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  return read_tensor_file(is);
}

NamedTensor to_named(const std::string& name, const Tensor& t) {
  NamedTensor e{name, t.shape(), {}};
  e.values.reserve(static_cast<std::size_t>(t.numel()));
  for (double v : t.data()) e.values.push_back(static_cast<float>(v));
  return e;
}

}  // namespace aft
