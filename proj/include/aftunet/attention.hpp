// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-head scaled dot-product attention over a token grid [N, P, C]
// (N slices, P = H_L * W_L positions per slice, position p = W_L * h + w).
// Head a uses channels [a * C/A, (a+1) * C/A) of q, k and v.
//
//   full  : every token attends to all N * P tokens
//   intra : a token attends to the P tokens of its own slice
//   inter : a token attends to the N tokens at its own (h, w)

#pragma once

#include <cstdint>

#include "aftunet/tensor.hpp"

namespace aft {

enum class AttentionKind { kFull, kIntra, kInter };

const char* attention_kind_name(AttentionKind kind);

/// Incremented by each attention call. Dot products are counted per head.
struct AttentionCounters {
  std::int64_t calls = 0;
  std::int64_t dot_products = 0;
  std::int64_t map_elements = 0;  // attention weights materialized
};

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, AttentionKind kind,
                 AttentionCounters* counters = nullptr);

inline Tensor attention_full3d(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                               AttentionCounters* counters = nullptr) {
  return attention(q, k, v, heads, AttentionKind::kFull, counters);
}
inline Tensor attention_intra(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                              AttentionCounters* counters = nullptr) {
  return attention(q, k, v, heads, AttentionKind::kIntra, counters);
}
inline Tensor attention_inter(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                              AttentionCounters* counters = nullptr) {
  return attention(q, k, v, heads, AttentionKind::kInter, counters);
}

/// Attention weights of one call, [heads, groups, S, S] row-stochastic. For
/// inspection in tests; the forward op keeps its own copy for backward.
Tensor attention_weights(const Tensor& q, const Tensor& k, int heads, AttentionKind kind);

}  // namespace aft
