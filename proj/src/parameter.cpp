// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "aftunet/parameter.hpp"

#include <algorithm>
#include <cmath>

#include "aftunet/errors.hpp"

namespace aft {

Tensor ParameterStore::add(const std::string& name, Shape shape) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
  params_.push_back({name, Tensor::zeros(std::move(shape), true)});
  return params_.back().tensor;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = std::find_if(params_.begin(), params_.end(),
                         [&](const Parameter& p) { return p.name == name; });
  return it == params_.end() ? nullptr : &*it;
}

std::int64_t ParameterStore::count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

std::map<std::string, std::int64_t> ParameterStore::count_by_prefix(int depth) const {
  std::map<std::string, std::int64_t> out;
  for (const auto& p : params_) {
    std::size_t end = 0;
    for (int i = 0; i < depth; ++i) {
      end = p.name.find('.', i == 0 ? 0 : end + 1);
      if (end == std::string::npos) break;
    }
    out[p.name.substr(0, end)] += p.tensor.numel();
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

namespace init {

void fill(Tensor& t, double value) {
  auto d = t.mutable_data();
  std::fill(d.begin(), d.end(), value);
}

void normal(Tensor& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& x : t.mutable_data()) x = dist(rng);
}

void xavier_uniform(Tensor& t, std::int64_t fan_in, std::int64_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& x : t.mutable_data()) x = dist(rng);
}

void kaiming_normal(Tensor& t, std::int64_t fan_in, std::mt19937_64& rng) {
  normal(t, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
}

}  // namespace init

}  // namespace aft
