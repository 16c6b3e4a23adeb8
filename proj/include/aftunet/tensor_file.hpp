// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Named-tensor container used for checkpoints.
//
// Layout (little-endian):
//   "AFTC" | version u32 | entry count u32 |
//   per entry: name length u16, UTF-8 name, rank u8, extents u32 x rank,
//              f32 values row-major

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "aftunet/tensor.hpp"

namespace aft {

inline constexpr std::uint32_t kTensorFileVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

void write_tensor_file(std::ostream& os, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_tensor_file(std::istream& is);

void write_tensor_file(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path);

/// Narrows to f32. Training keeps parameters on the f32 grid so this is exact
/// for checkpointed state.
NamedTensor to_named(const std::string& name, const Tensor& t);

}  // namespace aft
