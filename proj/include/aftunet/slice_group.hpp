// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Axial neighbour sampling. For centre slice d the group holds slices
//   a_n = clamp(d - N_f * (N_A/2 - n), 0, D-1),   n = 0 .. N_A-1,
// so slice N_A/2 of the group is d itself.

#pragma once

#include <cstdint>
#include <iterator>
#include <vector>

#include "aftunet/tensor.hpp"
#include "aftunet/volume.hpp"

namespace aft {

struct SliceGroup {
  int center = 0;
  int neighbors = 0;  // N_A
  int frequency = 1;  // N_f
  std::vector<int> indices;
  /// Slice-major image batch [N_A, C, H, W]; element n is volume slice indices[n].
  Tensor slices;
  /// Ground truth [N_A, H, W] when sampled with labels, else empty.
  std::vector<std::uint8_t> labels;

  int middle() const { return neighbors / 2; }
};

/// Throws ConfigError unless N_A is even (or 1, the single-slice ablation)
/// and N_f >= 1.
void validate_group_shape(int neighbors, int frequency);

/// The clamped axial indices a_0 .. a_{N_A-1}.
std::vector<int> group_indices(int center, int neighbors, int frequency, int depth);

SliceGroup sample_slice_group(const Volume& v, int center, int neighbors, int frequency);
SliceGroup sample_slice_group(const Volume& v, const LabelVolume& labels, int center,
                              int neighbors, int frequency);

/// Lazily yields the group for every centre d = 0 .. D-1 in order.
class GroupRange {
 public:
  GroupRange(const Volume& v, int neighbors, int frequency);

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = SliceGroup;
    using difference_type = std::ptrdiff_t;
    using reference = SliceGroup;
    using pointer = void;

    iterator() = default;
    iterator(const GroupRange* range, int center) : range_(range), center_(center) {}
    SliceGroup operator*() const;
    iterator& operator++() {
      ++center_;
      return *this;
    }
    iterator operator++(int) {
      iterator old = *this;
      ++center_;
      return old;
    }
    bool operator==(const iterator& other) const { return center_ == other.center_; }

   private:
    const GroupRange* range_ = nullptr;
    int center_ = 0;
  };

  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, volume_->depth}; }
  std::size_t size() const { return static_cast<std::size_t>(volume_->depth); }

 private:
  const Volume* volume_;
  int neighbors_;
  int frequency_;
};

inline GroupRange iter_groups(const Volume& v, int neighbors, int frequency) {
  return GroupRange(v, neighbors, frequency);
}

}  // namespace aft
