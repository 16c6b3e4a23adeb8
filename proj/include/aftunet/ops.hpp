// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable layer primitives. Every function here records a backward
// closure when any input requires a gradient.
//
// Image ops accept either a single image [C,H,W] or a batch [N,C,H,W]; the
// batch form applies the same weights to every image.

#pragma once

#include <vector>

#include "aftunet/tensor.hpp"

namespace aft::ops {

inline constexpr double kNormEps = 1e-5;

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
/// out.shape[i] = a.shape[perm[i]].
Tensor permute(const Tensor& a, const std::vector<int>& perm);
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Sub-range [start, start+length) along `axis`.
Tensor narrow(const Tensor& a, int axis, std::int64_t start, std::int64_t length);

/// Cross-correlation, stride 1, zero padding. `bias` may be undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int padding);

/// 2x2 window, stride 2. Ties route the gradient to the first maximum in
/// row-major window order.
Tensor maxpool2(const Tensor& input);

/// Nearest-neighbour x2 replication of the two trailing axes.
Tensor upsample2(const Tensor& input);

/// Per-image, per-channel normalization over H*W followed by an affine map.
Tensor instance_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                     double eps = kNormEps);

/// Normalization over the trailing axis followed by an affine map.
Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  double eps = kNormEps);

/// y = x W^T + b over the trailing axis. `bias` may be undefined.
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Softmax over the trailing axis (max-subtracted).
Tensor softmax(const Tensor& input);

}  // namespace aft::ops
