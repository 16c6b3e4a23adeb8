// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "aftunet/errors.hpp"

namespace aft {

namespace {

double eval_scalar(const std::function<Tensor()>& f, const std::string& name) {
  NoGradGuard guard;
  const double v = f().item();
  if (!std::isfinite(v)) throw NumericError("non-finite function value while perturbing " + name);
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f, const std::vector<Parameter>& params,
                           double step) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor out = f();
  if (!std::isfinite(out.item())) throw NumericError("non-finite function value");
  out.backward();

  GradCheckResult result;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(analytic[i])) throw NumericError("non-finite gradient for " + p.name);
      const double saved = values[i];
      values[i] = saved + step;
      const double up = eval_scalar(f, p.name);
      values[i] = saved - step;
      const double down = eval_scalar(f, p.name);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      ++result.checked;
      if (err > result.max_rel_error || result.worst_index < 0) {
        result.max_rel_error = err;
        result.worst_param = p.name;
        result.worst_index = static_cast<std::int64_t>(i);
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                           double step) {
  std::vector<Parameter> named;
  named.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    named.push_back({"input[" + std::to_string(i) + "]", inputs[i]});
  }
  return grad_check(f, named, step);
}

}  // namespace aft
