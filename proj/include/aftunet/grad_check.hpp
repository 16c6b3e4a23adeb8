// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "aftunet/parameter.hpp"
#include "aftunet/tensor.hpp"

namespace aft {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::int64_t worst_index = -1;
  std::int64_t checked = 0;
};

/// Compares reverse-mode gradients of the scalar `f` with central
/// differences, element by element, over every tensor in `params`.
///
/// The error for one element is |analytic - numeric| / max(1, |numeric|).
/// `f` is re-evaluated twice per element, so keep inputs small. Throws
/// NumericError naming the parameter if `f` or a gradient is non-finite.
GradCheckResult grad_check(const std::function<Tensor()>& f, const std::vector<Parameter>& params,
                           double step = 1e-5);

/// Unnamed convenience form; tensors are reported as "input[i]".
GradCheckResult grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                           double step = 1e-5);

}  // namespace aft
