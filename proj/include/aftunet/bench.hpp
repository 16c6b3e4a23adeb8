// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Attention cost accounting. Comparison counts come from running the real
// attention kernels with counters attached; memory figures are analytic
// sizes of the attention-weight maps.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aftunet/model.hpp"

namespace aft {

struct Grid {
  int height = 1;     // H_L
  int width = 1;      // W_L
  int neighbors = 1;  // N_A

  std::int64_t positions() const { return static_cast<std::int64_t>(height) * width; }
  std::int64_t tokens() const { return positions() * neighbors; }
  std::string str() const;
};

/// Parses "HxWxN".
Grid parse_grid(const std::string& text);

struct AttnCostReport {
  Grid grid;
  std::int64_t comparisons_per_query_full = 0;
  std::int64_t comparisons_per_query_factorized = 0;
  std::int64_t map_elements_full = 0;        // single head, as allocated
  std::int64_t map_elements_factorized = 0;  // inter + intra, single head
  double reduction_ratio = 0.0;              // full / factorized comparisons
};

/// Runs full and factorized attention once each (one head) with counters
/// and checks the counts against H*W*N and H*W + N. Throws
/// std::logic_error on any mismatch.
AttnCostReport count_comparisons(Grid grid);

struct AttentionMemory {
  std::int64_t full_bytes = 0;
  std::int64_t factorized_bytes = 0;
  double ratio = 0.0;
};

/// full = A (HWN)^2 scalars, factorized = A (HWN)(HW + N) scalars.
AttentionMemory attention_memory(Grid grid, int heads, int bytes_per_scalar);

std::string format_cost_table(const std::vector<AttnCostReport>& reports, int heads,
                              int bytes_per_scalar);
/// key=value lines for one grid.
std::string format_cost_metrics(const AttnCostReport& report, const AttentionMemory& memory);

struct ModuleProfile {
  std::string name;
  std::int64_t parameters = 0;
  std::int64_t activations = 0;  // output elements of the module's layers, one group
};

/// Exact parameter counts per module plus an analytic per-group activation
/// estimate (feature maps for CNN parts, tokens and attention maps for the
/// transformer).
std::vector<ModuleProfile> profile_model(const ModelConfig& cfg);
std::string format_profile(const std::vector<ModuleProfile>& rows);

}  // namespace aft
