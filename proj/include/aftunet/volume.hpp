// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// 3D scans and label maps on a C x H x W x D grid (depth fastest), plus the
// AFTV file format:
//
//   "AFTV" | version u32 (=1) | dtype u8 (0 = f32 intensity, 1 = u8 labels) |
//   C u32 | H u32 | W u32 | D u32 | spacing f32 x 3 (depth, height, width mm) |
//   payload in (c, h, w, d) order, d innermost

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace aft {

struct Spacing {
  float depth_mm = 1.0f;
  float height_mm = 1.0f;
  float width_mm = 1.0f;

  bool operator==(const Spacing&) const = default;
};

/// The acquisition grid the intensity volumes are brought to before training.
inline constexpr Spacing kTargetSpacing{2.5f, 1.0f, 1.0f};

struct Volume {
  int channels = 1;
  int height = 0;
  int width = 0;
  int depth = 0;
  Spacing spacing;
  std::vector<float> voxels;

  Volume() = default;
  Volume(int c, int h, int w, int d, Spacing s = {});

  std::size_t index(int c, int h, int w, int d) const {
    return ((static_cast<std::size_t>(c) * height + h) * width + w) * depth + d;
  }
  float& at(int c, int h, int w, int d) { return voxels[index(c, h, w, d)]; }
  float at(int c, int h, int w, int d) const { return voxels[index(c, h, w, d)]; }
};

struct LabelVolume {
  int height = 0;
  int width = 0;
  int depth = 0;
  Spacing spacing;
  std::vector<std::uint8_t> voxels;

  LabelVolume() = default;
  LabelVolume(int h, int w, int d, Spacing s = {});

  std::size_t index(int h, int w, int d) const {
    return (static_cast<std::size_t>(h) * width + w) * depth + d;
  }
  std::uint8_t& at(int h, int w, int d) { return voxels[index(h, w, d)]; }
  std::uint8_t at(int h, int w, int d) const { return voxels[index(h, w, d)]; }
};

bool same_grid(const Volume& v, const LabelVolume& l);

struct VolumeHeader {
  std::uint8_t dtype = 0;
  std::uint32_t channels = 0, height = 0, width = 0, depth = 0;
  Spacing spacing;
};

enum class VoxelType : std::uint8_t { kIntensity = 0, kLabel = 1 };

void write_volume(std::ostream& os, const Volume& v);
void write_volume(std::ostream& os, const LabelVolume& l);
Volume read_volume(std::istream& is);
LabelVolume read_labels(std::istream& is);

void write_volume(const std::filesystem::path& path, const Volume& v);
void write_volume(const std::filesystem::path& path, const LabelVolume& l);
Volume read_volume(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path);
VolumeHeader read_volume_header(const std::filesystem::path& path);

/// Trilinear resampling onto `target` spacing. Output extents are
/// round(extent * old_spacing / new_spacing); voxel centres are aligned.
Volume resample(const Volume& v, Spacing target);
/// Nearest-neighbour counterpart for label maps.
LabelVolume resample(const LabelVolume& l, Spacing target);
/// Nearest-neighbour resampling onto explicit extents, e.g. back onto the
/// grid a volume was resampled from.
LabelVolume resample_to_grid(const LabelVolume& l, Spacing target, int height, int width,
                             int depth);

/// Clips to [lo, hi] and rescales to [0, 1].
void normalize_window(Volume& v, float lo, float hi);

/// Zero-pads H and W at the bottom/right to exactly height x width.
Volume pad_to(const Volume& v, int height, int width);
LabelVolume pad_to(const LabelVolume& l, int height, int width);
/// Zero-pads H and W at the bottom/right up to multiples of `multiple`.
Volume pad_to_multiple(const Volume& v, int multiple);
LabelVolume pad_to_multiple(const LabelVolume& l, int multiple);
/// Inverse of pad_to_multiple for label predictions.
LabelVolume crop(const LabelVolume& l, int height, int width);

}  // namespace aft
