// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hand-evaluated axial neighbour indices, a_n = d - N_f * (N_A/2 - n) with
// out-of-range values clamped to [0, D-1]. Shared by the unit and
// acceptance suites.

#pragma once

#include <array>
#include <vector>

namespace aft::testing {

struct SamplingCase {
  int depth, center, neighbors, frequency;
  std::vector<int> expected;
};

inline const std::array<SamplingCase, 20> kSamplingCases{{
    {10, 5, 4, 1, {3, 4, 5, 6}},
    {10, 0, 4, 1, {0, 0, 0, 1}},
    {10, 5, 4, 2, {1, 3, 5, 7}},
    {10, 9, 4, 1, {7, 8, 9, 9}},
    {10, 1, 4, 1, {0, 0, 1, 2}},
    {32, 16, 8, 1, {12, 13, 14, 15, 16, 17, 18, 19}},
    {32, 0, 8, 1, {0, 0, 0, 0, 0, 1, 2, 3}},
    {32, 31, 8, 1, {27, 28, 29, 30, 31, 31, 31, 31}},
    {32, 16, 8, 4, {0, 4, 8, 12, 16, 20, 24, 28}},
    {32, 10, 8, 2, {2, 4, 6, 8, 10, 12, 14, 16}},
    {32, 3, 8, 2, {0, 0, 0, 1, 3, 5, 7, 9}},
    {20, 18, 4, 3, {12, 15, 18, 19}},
    {5, 2, 2, 1, {1, 2}},
    {5, 0, 2, 1, {0, 0}},
    {5, 4, 2, 5, {0, 4}},
    {1, 0, 4, 1, {0, 0, 0, 0}},
    {3, 1, 8, 1, {0, 0, 0, 0, 1, 2, 2, 2}},
    {100, 50, 6, 1, {47, 48, 49, 50, 51, 52}},
    {100, 98, 6, 2, {92, 94, 96, 98, 99, 99}},
    {12, 6, 1, 1, {6}},
}};

}  // namespace aft::testing
