// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Segmentation losses and the Dice similarity coefficient. Logits are
// [N, C_cls, H, W]; labels are class indices in [N, H, W] order.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aftunet/tensor.hpp"
#include "aftunet/volume.hpp"

namespace aft {

inline constexpr double kDiceSmooth = 1.0;

/// 1 - mean over foreground classes of (2 sum p*g + s) / (sum p + sum g + s)
/// with p the softmax probabilities.
Tensor dice_loss(const Tensor& logits, std::span<const std::uint8_t> labels,
                 double smooth = kDiceSmooth);

/// Mean of -log softmax(true class), via log-sum-exp.
Tensor ce_loss(const Tensor& logits, std::span<const std::uint8_t> labels);

/// dice_loss + ce_loss.
Tensor combined_loss(const Tensor& logits, std::span<const std::uint8_t> labels);

/// 2 |p & g| / (|p| + |g|) over nonzero entries; 1.0 when both are empty.
double dsc(std::span<const std::uint8_t> pred_mask, std::span<const std::uint8_t> true_mask);

/// DSC of the binary masks (pred == cls) and (truth == cls).
double class_dsc(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth,
                 std::uint8_t cls);

/// Per-pixel argmax over classes of slice `slice` of [N, C, H, W] logits
/// (first maximum wins), row-major [H, W].
std::vector<std::uint8_t> argmax_slice(const Tensor& logits, std::int64_t slice);

struct SegmentationGroup {
  int center = 0;
  Tensor logits;  // [N_A, C_cls, H, W]
};

/// Stacks the argmax of each group's middle map (index N_A/2) into a label
/// volume of depth groups.size(). Groups must cover centres 0..D-1 in order.
LabelVolume assemble(const std::vector<SegmentationGroup>& groups);

}  // namespace aft
