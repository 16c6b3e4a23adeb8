// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "aftunet/tensor.hpp"

namespace aft {

struct Parameter {
  std::string name;  // dotted path, e.g. "encoder.block3.conv1.weight"
  Tensor tensor;
};

/// Ordered registry of trainable tensors. Registration order is the
/// serialization order.
class ParameterStore {
 public:
  /// Creates a zero tensor with requires_grad set and returns a handle to
  /// it. Throws on duplicate names.
  Tensor add(const std::string& name, Shape shape);

  const std::vector<Parameter>& params() const { return params_; }
  std::vector<Parameter>& params() { return params_; }
  const Parameter* find(const std::string& name) const;

  std::int64_t count() const;
  /// Element counts summed by the first `depth` dotted name components.
  std::map<std::string, std::int64_t> count_by_prefix(int depth) const;

  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

namespace init {

void fill(Tensor& t, double value);
void normal(Tensor& t, double stddev, std::mt19937_64& rng);
/// U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(Tensor& t, std::int64_t fan_in, std::int64_t fan_out, std::mt19937_64& rng);
/// N(0, 2 / fan_in), the ReLU gain.
void kaiming_normal(Tensor& t, std::int64_t fan_in, std::mt19937_64& rng);

}  // namespace init

}  // namespace aft
