// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "aftunet/binary_io.hpp"
#include "aftunet/errors.hpp"

namespace aft {

namespace {

constexpr std::uint32_t kVolumeVersion = 1;

void check_dims(int c, int h, int w, int d) {
  if (c < 1 || h < 1 || w < 1 || d < 1) {
    throw ShapeError("volume extents must be positive, got C=" + std::to_string(c) +
                     " H=" + std::to_string(h) + " W=" + std::to_string(w) +
                     " D=" + std::to_string(d));
  }
}

void write_header(std::ostream& os, VoxelType type, int c, int h, int w, int d, Spacing s) {
  os.write("AFTV", 4);
  binio::put_uint<std::uint32_t>(os, kVolumeVersion);
  binio::put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(type));
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(c));
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(h));
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(w));
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  binio::put_f32(os, s.depth_mm);
  binio::put_f32(os, s.height_mm);
  binio::put_f32(os, s.width_mm);
}

VolumeHeader read_header(std::istream& is) {
  binio::expect_magic(is, "AFTV");
  const auto version = binio::get_uint<std::uint32_t>(is, "version");
  if (version != kVolumeVersion) {
    throw FormatError("unsupported volume version " + std::to_string(version));
  }
  VolumeHeader h;
  h.dtype = binio::get_uint<std::uint8_t>(is, "dtype");
  if (h.dtype > 1) throw FormatError("unknown volume dtype " + std::to_string(h.dtype));
  h.channels = binio::get_uint<std::uint32_t>(is, "C");
  h.height = binio::get_uint<std::uint32_t>(is, "H");
  h.width = binio::get_uint<std::uint32_t>(is, "W");
  h.depth = binio::get_uint<std::uint32_t>(is, "D");
  h.spacing.depth_mm = binio::get_f32(is, "spacing");
  h.spacing.height_mm = binio::get_f32(is, "spacing");
  h.spacing.width_mm = binio::get_f32(is, "spacing");
  if (h.channels == 0 || h.height == 0 || h.width == 0 || h.depth == 0) {
    throw FormatError("volume header has a zero extent");
  }
  if (!(h.spacing.depth_mm > 0 && h.spacing.height_mm > 0 && h.spacing.width_mm > 0)) {
    throw FormatError("volume header has non-positive spacing");
  }
  if (h.dtype == static_cast<std::uint8_t>(VoxelType::kLabel) && h.channels != 1) {
    throw FormatError("label volumes must have C=1");
  }
  return h;
}

void expect_end(std::istream& is) {
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("payload longer than header extents imply");
  }
}

template <typename T>
void read_payload(std::istream& is, std::vector<T>& out) {
  if constexpr (sizeof(T) == 1) {
    if (!is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()))) {
      throw FormatError("payload shorter than header extents imply");
    }
  } else {
    for (auto& v : out) {
      try {
        v = binio::get_f32(is, "payload");
      } catch (const FormatError&) {
        throw FormatError("payload shorter than header extents imply");
      }
    }
  }
}

// Source coordinate of output sample i when resampling n_in samples at
// spacing s_in onto spacing s_out (voxel centres aligned), clamped to the grid.
double source_coord(int i, double s_in, double s_out, int n_in) {
  const double x = (i + 0.5) * (s_out / s_in) - 0.5;
  return std::clamp(x, 0.0, static_cast<double>(n_in - 1));
}

int resampled_extent(int n, float s_in, float s_out, const char* axis) {
  if (!(s_in > 0) || !(s_out > 0)) throw ConfigError(std::string("spacing must be positive on ") + axis);
  const long out = std::lround(static_cast<double>(n) * s_in / s_out);
  if (out < 1) {
    throw ShapeError(std::string("resampling collapses the ") + axis + " axis to zero voxels");
  }
  return static_cast<int>(out);
}

struct Lerp {
  int i0, i1;
  double t;
};

std::vector<Lerp> lerp_table(int n_out, int n_in, double s_in, double s_out) {
  std::vector<Lerp> table(static_cast<std::size_t>(n_out));
  for (int i = 0; i < n_out; ++i) {
    const double x = source_coord(i, s_in, s_out, n_in);
    const int i0 = static_cast<int>(std::floor(x));
    const int i1 = std::min(i0 + 1, n_in - 1);
    table[static_cast<std::size_t>(i)] = {i0, i1, x - i0};
  }
  return table;
}

}  // namespace

Volume::Volume(int c, int h, int w, int d, Spacing s)
    : channels(c), height(h), width(w), depth(d), spacing(s) {
  check_dims(c, h, w, d);
  voxels.assign(static_cast<std::size_t>(c) * h * w * d, 0.0f);
}

LabelVolume::LabelVolume(int h, int w, int d, Spacing s) : height(h), width(w), depth(d), spacing(s) {
  check_dims(1, h, w, d);
  voxels.assign(static_cast<std::size_t>(h) * w * d, 0);
}

bool same_grid(const Volume& v, const LabelVolume& l) {
  return v.height == l.height && v.width == l.width && v.depth == l.depth;
}

void write_volume(std::ostream& os, const Volume& v) {
  write_header(os, VoxelType::kIntensity, v.channels, v.height, v.width, v.depth, v.spacing);
  for (float x : v.voxels) binio::put_f32(os, x);
  if (!os) throw FormatError("volume write failed");
}

void write_volume(std::ostream& os, const LabelVolume& l) {
  write_header(os, VoxelType::kLabel, 1, l.height, l.width, l.depth, l.spacing);
  os.write(reinterpret_cast<const char*>(l.voxels.data()),
           static_cast<std::streamsize>(l.voxels.size()));
  if (!os) throw FormatError("label write failed");
}

Volume read_volume(std::istream& is) {
  const auto h = read_header(is);
  if (h.dtype != static_cast<std::uint8_t>(VoxelType::kIntensity)) {
    throw FormatError("expected an intensity volume (dtype 0), got dtype " + std::to_string(h.dtype));
  }
  Volume v(static_cast<int>(h.channels), static_cast<int>(h.height), static_cast<int>(h.width),
           static_cast<int>(h.depth), h.spacing);
  read_payload(is, v.voxels);
  expect_end(is);
  return v;
}

LabelVolume read_labels(std::istream& is) {
  const auto h = read_header(is);
  if (h.dtype != static_cast<std::uint8_t>(VoxelType::kLabel)) {
    throw FormatError("expected a label volume (dtype 1), got dtype " + std::to_string(h.dtype));
  }
  LabelVolume l(static_cast<int>(h.height), static_cast<int>(h.width), static_cast<int>(h.depth),
                h.spacing);
  read_payload(is, l.voxels);
  expect_end(is);
  return l;
}

void write_volume(const std::filesystem::path& path, const Volume& v) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  write_volume(os, v);
}

void write_volume(const std::filesystem::path& path, const LabelVolume& l) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  write_volume(os, l);
}

Volume read_volume(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  return read_volume(is);
}

LabelVolume read_labels(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  return read_labels(is);
}

VolumeHeader read_volume_header(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  return read_header(is);
}

Volume resample(const Volume& v, Spacing target) {
  const int h = resampled_extent(v.height, v.spacing.height_mm, target.height_mm, "height");
  const int w = resampled_extent(v.width, v.spacing.width_mm, target.width_mm, "width");
  const int d = resampled_extent(v.depth, v.spacing.depth_mm, target.depth_mm, "depth");
  const auto th = lerp_table(h, v.height, v.spacing.height_mm, target.height_mm);
  const auto tw = lerp_table(w, v.width, v.spacing.width_mm, target.width_mm);
  const auto td = lerp_table(d, v.depth, v.spacing.depth_mm, target.depth_mm);
  Volume out(v.channels, h, w, d, target);
  for (int c = 0; c < v.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      const auto& ly = th[static_cast<std::size_t>(y)];
      for (int x = 0; x < w; ++x) {
        const auto& lx = tw[static_cast<std::size_t>(x)];
        for (int z = 0; z < d; ++z) {
          const auto& lz = td[static_cast<std::size_t>(z)];
          // std::lerp is exact at equal endpoints, so constants survive.
          auto sample = [&](int yy, int xx) {
            return std::lerp(static_cast<double>(v.at(c, yy, xx, lz.i0)),
                             static_cast<double>(v.at(c, yy, xx, lz.i1)), lz.t);
          };
          const double top = std::lerp(sample(ly.i0, lx.i0), sample(ly.i0, lx.i1), lx.t);
          const double bot = std::lerp(sample(ly.i1, lx.i0), sample(ly.i1, lx.i1), lx.t);
          out.at(c, y, x, z) = static_cast<float>(std::lerp(top, bot, ly.t));
        }
      }
    }
  }
  return out;
}

LabelVolume resample(const LabelVolume& l, Spacing target) {
  return resample_to_grid(l, target,
                          resampled_extent(l.height, l.spacing.height_mm, target.height_mm, "height"),
                          resampled_extent(l.width, l.spacing.width_mm, target.width_mm, "width"),
                          resampled_extent(l.depth, l.spacing.depth_mm, target.depth_mm, "depth"));
}

LabelVolume resample_to_grid(const LabelVolume& l, Spacing target, int h, int w, int d) {
  check_dims(1, h, w, d);
  auto nearest = [](int i, int n_in, float s_in, float s_out) {
    return static_cast<int>(std::lround(source_coord(i, s_in, s_out, n_in)));
  };
  LabelVolume out(h, w, d, target);
  for (int y = 0; y < h; ++y) {
    const int sy = nearest(y, l.height, l.spacing.height_mm, target.height_mm);
    for (int x = 0; x < w; ++x) {
      const int sx = nearest(x, l.width, l.spacing.width_mm, target.width_mm);
      for (int z = 0; z < d; ++z) {
        out.at(y, x, z) = l.at(sy, sx, nearest(z, l.depth, l.spacing.depth_mm, target.depth_mm));
      }
    }
  }
  return out;
}

void normalize_window(Volume& v, float lo, float hi) {
  if (!(hi > lo)) throw ConfigError("intensity window must satisfy lo < hi");
  const float span = hi - lo;
  for (auto& x : v.voxels) x = (std::clamp(x, lo, hi) - lo) / span;
}

namespace {

int round_up(int n, int multiple) { return (n + multiple - 1) / multiple * multiple; }

}  // namespace

Volume pad_to(const Volume& v, int height, int width) {
  if (height < v.height || width < v.width) {
    throw ShapeError("cannot pad " + std::to_string(v.height) + "x" + std::to_string(v.width) +
                     " down to " + std::to_string(height) + "x" + std::to_string(width));
  }
  Volume out(v.channels, height, width, v.depth, v.spacing);
  for (int c = 0; c < v.channels; ++c) {
    for (int y = 0; y < v.height; ++y) {
      for (int x = 0; x < v.width; ++x) {
        std::copy_n(&v.voxels[v.index(c, y, x, 0)], v.depth, &out.voxels[out.index(c, y, x, 0)]);
      }
    }
  }
  return out;
}

LabelVolume pad_to(const LabelVolume& l, int height, int width) {
  if (height < l.height || width < l.width) {
    throw ShapeError("cannot pad " + std::to_string(l.height) + "x" + std::to_string(l.width) +
                     " down to " + std::to_string(height) + "x" + std::to_string(width));
  }
  LabelVolume out(height, width, l.depth, l.spacing);
  for (int y = 0; y < l.height; ++y) {
    for (int x = 0; x < l.width; ++x) {
      std::copy_n(&l.voxels[l.index(y, x, 0)], l.depth, &out.voxels[out.index(y, x, 0)]);
    }
  }
  return out;
}

Volume pad_to_multiple(const Volume& v, int multiple) {
  if (multiple < 1) throw ConfigError("pad multiple must be positive");
  return pad_to(v, round_up(v.height, multiple), round_up(v.width, multiple));
}

LabelVolume pad_to_multiple(const LabelVolume& l, int multiple) {
  if (multiple < 1) throw ConfigError("pad multiple must be positive");
  return pad_to(l, round_up(l.height, multiple), round_up(l.width, multiple));
}

LabelVolume crop(const LabelVolume& l, int height, int width) {
  if (height > l.height || width > l.width) throw ShapeError("crop larger than source");
  LabelVolume out(height, width, l.depth, l.spacing);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::copy_n(&l.voxels[l.index(y, x, 0)], l.depth, &out.voxels[out.index(y, x, 0)]);
    }
  }
  return out;
}

}  // namespace aft
