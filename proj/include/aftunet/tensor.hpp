// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors with a dynamic reverse-mode tape.
//
// A Tensor is a shared handle: copies alias the same storage and graph node.
// Operations that see at least one input with requires_grad() (and run
// outside a NoGradGuard) record a backward closure on the result. Calling
// backward() on a scalar walks the recorded graph in reverse topological
// order and accumulates into every reachable grad buffer.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aft {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  /// Extent of axis `axis`; negative values count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const;
  /// Accumulated gradient; zeros when nothing has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Reverse-mode sweep from this (single-element) tensor.
  void backward() const;

  /// Same values, no graph history, fresh storage.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape, std::vector<double>, std::span<const Tensor>,
                            std::function<void(detail::Node&)>);
};

/// Builds an op output. The backward closure receives the output node (its
/// grad is populated) and must accumulate into `out.inputs[i]->ensure_grad()`
/// for inputs with requires_grad. The closure is dropped when no input
/// requires a gradient or grad mode is off.
Tensor make_result(Shape shape, std::vector<double> value, std::span<const Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn);

inline Tensor make_result(Shape shape, std::vector<double> value,
                          std::initializer_list<Tensor> inputs,
                          std::function<void(detail::Node&)> backward_fn) {
  return make_result(std::move(shape), std::move(value),
                     std::span<const Tensor>(inputs.begin(), inputs.size()),
                     std::move(backward_fn));
}

bool grad_enabled();

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace aft
