// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/slice_group.hpp"

#include <algorithm>
#include <string>

#include "aftunet/errors.hpp"

namespace aft {

void validate_group_shape(int neighbors, int frequency) {
  if (neighbors < 1 || (neighbors != 1 && neighbors % 2 != 0)) {
    throw ConfigError("n_a must be even (or 1), got " + std::to_string(neighbors));
  }
  if (frequency < 1) throw ConfigError("n_f must be >= 1, got " + std::to_string(frequency));
}

std::vector<int> group_indices(int center, int neighbors, int frequency, int depth) {
  validate_group_shape(neighbors, frequency);
  if (center < 0 || center >= depth) {
    throw ShapeError("centre slice " + std::to_string(center) + " outside [0, " +
                     std::to_string(depth) + ")");
  }
  std::vector<int> idx(static_cast<std::size_t>(neighbors));
  const int half = neighbors / 2;
  for (int n = 0; n < neighbors; ++n) {
    idx[static_cast<std::size_t>(n)] = std::clamp(center - frequency * (half - n), 0, depth - 1);
  }
  return idx;
}

namespace {

SliceGroup gather(const Volume& v, int center, int neighbors, int frequency) {
  SliceGroup g;
  g.center = center;
  g.neighbors = neighbors;
  g.frequency = frequency;
  g.indices = group_indices(center, neighbors, frequency, v.depth);
  const std::size_t plane = static_cast<std::size_t>(v.height) * v.width;
  std::vector<double> data(static_cast<std::size_t>(neighbors) * v.channels * plane);
  for (int n = 0; n < neighbors; ++n) {
    const int z = g.indices[static_cast<std::size_t>(n)];
    for (int c = 0; c < v.channels; ++c) {
      double* dst = data.data() + (static_cast<std::size_t>(n) * v.channels + c) * plane;
      for (int y = 0; y < v.height; ++y) {
        for (int x = 0; x < v.width; ++x) dst[static_cast<std::size_t>(y) * v.width + x] = v.at(c, y, x, z);
      }
    }
  }
  g.slices = Tensor::from_data({neighbors, v.channels, v.height, v.width}, std::move(data));
  return g;
}

}  // namespace

SliceGroup sample_slice_group(const Volume& v, int center, int neighbors, int frequency) {
  return gather(v, center, neighbors, frequency);
}

SliceGroup sample_slice_group(const Volume& v, const LabelVolume& labels, int center,
                              int neighbors, int frequency) {
  if (!same_grid(v, labels)) throw ShapeError("label grid does not match volume grid");
  SliceGroup g = gather(v, center, neighbors, frequency);
  const std::size_t plane = static_cast<std::size_t>(v.height) * v.width;
  g.labels.resize(static_cast<std::size_t>(neighbors) * plane);
  for (int n = 0; n < neighbors; ++n) {
    const int z = g.indices[static_cast<std::size_t>(n)];
    for (int y = 0; y < v.height; ++y) {
      for (int x = 0; x < v.width; ++x) {
        g.labels[n * plane + static_cast<std::size_t>(y) * v.width + x] = labels.at(y, x, z);
      }
    }
  }
  return g;
}

GroupRange::GroupRange(const Volume& v, int neighbors, int frequency)
    : volume_(&v), neighbors_(neighbors), frequency_(frequency) {
  validate_group_shape(neighbors, frequency);
}

SliceGroup GroupRange::iterator::operator*() const {
  return sample_slice_group(*range_->volume_, center_, range_->neighbors_, range_->frequency_);
}

}  // namespace aft
