// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "aftunet/errors.hpp"

namespace aft {

namespace {

constexpr int kPlacementRetries = 200;
constexpr double kBackgroundLevel = 0.2;
constexpr double kNoiseSigma = 0.06;

struct Ellipsoid {
  double cy, cx, cz, ry, rx, rz;

  bool contains(int y, int x, int z) const {
    const double a = (y - cy) / ry, b = (x - cx) / rx, c = (z - cz) / rz;
    return a * a + b * b + c * c <= 1.0;
  }
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double place_center(std::mt19937_64& rng, double radius, int extent) {
  const double lo = radius, hi = extent - 1 - radius;
  if (hi <= lo) return (extent - 1) / 2.0;
  return uniform(rng, lo, hi);
}

Ellipsoid draw_ellipsoid(std::mt19937_64& rng, int cls, SynthDims dims) {
  const double plane = std::min(dims.height, dims.width);
  Ellipsoid e{};
  if (cls == 1) {
    // thin tube running along the axial axis
    e.ry = std::max(1.5, uniform(rng, 0.07, 0.10) * plane);
    e.rx = std::max(1.5, uniform(rng, 0.07, 0.10) * plane);
    e.rz = std::max(1.5, uniform(rng, 0.30, 0.42) * dims.depth);
  } else {
    e.ry = std::max(1.5, uniform(rng, 0.12, 0.20) * plane);
    e.rx = std::max(1.5, uniform(rng, 0.12, 0.20) * plane);
    e.rz = std::max(1.5, uniform(rng, 0.15, 0.28) * dims.depth);
  }
  e.cy = place_center(rng, e.ry, dims.height);
  e.cx = place_center(rng, e.rx, dims.width);
  e.cz = place_center(rng, e.rz, dims.depth);
  return e;
}

std::vector<int> covered_voxels(const Ellipsoid& e, const LabelVolume& l) {
  std::vector<int> out;
  const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.ry)));
  const int y1 = std::min(l.height - 1, static_cast<int>(std::ceil(e.cy + e.ry)));
  const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.rx)));
  const int x1 = std::min(l.width - 1, static_cast<int>(std::ceil(e.cx + e.rx)));
  const int z0 = std::max(0, static_cast<int>(std::floor(e.cz - e.rz)));
  const int z1 = std::min(l.depth - 1, static_cast<int>(std::ceil(e.cz + e.rz)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      for (int z = z0; z <= z1; ++z) {
        if (e.contains(y, x, z)) out.push_back(static_cast<int>(l.index(y, x, z)));
      }
    }
  }
  return out;
}

Scan make_scan(std::mt19937_64& rng, SynthDims dims, int n_classes) {
  Scan s{Volume(1, dims.height, dims.width, dims.depth, kTargetSpacing),
         LabelVolume(dims.height, dims.width, dims.depth, kTargetSpacing)};
  for (int cls = 1; cls < n_classes; ++cls) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      const auto voxels = covered_voxels(draw_ellipsoid(rng, cls, dims), s.labels);
      if (voxels.empty()) continue;
      const bool clear = std::all_of(voxels.begin(), voxels.end(), [&](int i) {
        return s.labels.voxels[static_cast<std::size_t>(i)] == 0;
      });
      if (!clear) continue;
      for (int i : voxels) s.labels.voxels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(cls);
      placed = true;
    }
    if (!placed) {
      throw ConfigError("could not place a non-overlapping ellipsoid for class " +
                        std::to_string(cls) + " after " + std::to_string(kPlacementRetries) +
                        " attempts; volume too small for " + std::to_string(n_classes) + " classes");
    }
  }
  std::normal_distribution<double> noise(0.0, kNoiseSigma);
  for (std::size_t i = 0; i < s.image.voxels.size(); ++i) {
    const int cls = s.labels.voxels[i];
    const double band = cls == 0 ? kBackgroundLevel
                                 : kBackgroundLevel + 0.6 * cls / static_cast<double>(n_classes - 1);
    s.image.voxels[i] = static_cast<float>(std::clamp(band + noise(rng), 0.0, 1.0));
  }
  return s;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    total += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  }
  for (auto& v : k) v /= total;
  return k;
}

// Separable blur with edge clamping, in place on an h x w plane.
void blur(std::vector<double>& plane, int h, int w, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(plane.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        s += k[static_cast<std::size_t>(i + r)] * plane[static_cast<std::size_t>(y * w + std::clamp(x + i, 0, w - 1))];
      }
      tmp[static_cast<std::size_t>(y * w + x)] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        s += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1) * w + x)];
      }
      plane[static_cast<std::size_t>(y * w + x)] = s;
    }
  }
}

std::vector<double> displacement_field(std::mt19937_64& rng, int h, int w, double amplitude,
                                       const std::vector<double>& kernel) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> field(static_cast<std::size_t>(h) * w);
  for (auto& v : field) v = dist(rng);
  blur(field, h, w, kernel);
  double peak = 0.0;
  for (double v : field) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.0 ? amplitude / peak : 0.0;
  for (auto& v : field) v *= gain;
  return field;
}

}  // namespace

Scan synth_scan(int index, SynthDims dims, int n_classes, std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("classes must be >= 2, got " + std::to_string(n_classes));
  if (n_classes > 255) throw ConfigError("classes must fit in a u8 label");
  if (dims.height < 1 || dims.width < 1 || dims.depth < 1) {
    throw ConfigError("dims must be positive");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  return make_scan(rng, dims, n_classes);
}

std::vector<Scan> synth_dataset(int n_scans, SynthDims dims, int n_classes, std::uint64_t seed) {
  if (n_scans < 1) throw ConfigError("scans must be >= 1");
  std::vector<Scan> out;
  out.reserve(static_cast<std::size_t>(n_scans));
  for (int i = 0; i < n_scans; ++i) out.push_back(synth_scan(i, dims, n_classes, seed));
  return out;
}

Scan elastic_augment(const Volume& v, const LabelVolume& l, double amplitude, double smoothness,
                     std::uint64_t seed) {
  if (amplitude < 0.0) throw ConfigError("elastic amplitude must be >= 0");
  if (!same_grid(v, l)) throw ShapeError("label grid does not match volume grid");
  if (amplitude == 0.0) return {v, l};
  if (!(smoothness > 0.0)) throw ConfigError("elastic smoothness must be > 0");

  Scan out{v, l};
  const auto kernel = gaussian_kernel(smoothness);
  std::mt19937_64 rng(seed);
  const int h = v.height, w = v.width;
  for (int z = 0; z < v.depth; ++z) {
    const auto dy = displacement_field(rng, h, w, amplitude, kernel);
    const auto dx = displacement_field(rng, h, w, amplitude, kernel);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto k = static_cast<std::size_t>(y * w + x);
        const double sy = std::clamp(y + dy[k], 0.0, h - 1.0);
        const double sx = std::clamp(x + dx[k], 0.0, w - 1.0);
        const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
        const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        const double ty = sy - y0, tx = sx - x0;
        for (int c = 0; c < v.channels; ++c) {
          const double top = std::lerp(static_cast<double>(v.at(c, y0, x0, z)),
                                       static_cast<double>(v.at(c, y0, x1, z)), tx);
          const double bot = std::lerp(static_cast<double>(v.at(c, y1, x0, z)),
                                       static_cast<double>(v.at(c, y1, x1, z)), tx);
          out.image.at(c, y, x, z) = static_cast<float>(std::lerp(top, bot, ty));
        }
        out.labels.at(y, x, z) =
            l.at(static_cast<int>(std::lround(sy)), static_cast<int>(std::lround(sx)), z);
      }
    }
  }
  return out;
}

}  // namespace aft
