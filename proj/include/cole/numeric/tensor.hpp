// Copyright 2026 The cole Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace cole::numeric {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss or parameter became NaN/Inf during training.
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace detail {
inline std::uint64_t next_node_sequence() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

/// One vertex of the reverse-mode graph. Interior nodes own their parents so
/// a loss tensor keeps the whole recorded computation alive.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";
  // Creation order; parents always precede their children.
  std::uint64_t sequence = detail::next_node_sequence();

  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const {
    const std::size_t c = cols();
    return c == 0 ? 0 : value.size() / c;
  }
  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

namespace detail {
inline thread_local bool grad_mode_enabled = true;
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_enabled; }

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_enabled) {
    detail::grad_mode_enabled = false;
  }
  ~NoGradGuard() { detail::grad_mode_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Shared handle to a graph node. Copies alias the same storage; parameters
/// are leaf tensors with `requires_grad` set.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape) {
    auto node = std::make_shared<Node<T>>();
    node->value.assign(element_count(shape), T(0));
    node->shape = std::move(shape);
    return Tensor(std::move(node));
  }

  static Tensor from_values(Shape shape, std::vector<T> values) {
    if (element_count(shape) != values.size()) {
      throw NumericError("tensor: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape_string(shape));
    }
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    return Tensor(std::move(node));
  }

  static Tensor scalar(T v) { return from_values({1}, {v}); }

  static Tensor parameter(Shape shape, std::vector<T> values) {
    Tensor t = from_values(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    t.node_->grad.assign(t.node_->value.size(), T(0));
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rows() const { return node_->rows(); }
  std::size_t cols() const { return node_->cols(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const T> values() const { return node_->value; }
  std::span<T> mutable_values() { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }

  T item() const {
    if (size() != 1) {
      throw NumericError("item() on tensor of shape " + shape_string(shape()));
    }
    return node_->value[0];
  }
  T at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  void zero_grad() {
    if (node_->requires_grad) node_->grad.assign(node_->value.size(), T(0));
  }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Creates the output node of an op. The backward function is only kept when
/// recording is on and at least one input needs a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(Node<T>&)> backward, const char* op) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  if (grad_enabled()) {
    bool needs = false;
    for (const Tensor<T>* in : inputs) needs = needs || in->requires_grad();
    if (needs) {
      node->requires_grad = true;
      for (const Tensor<T>* in : inputs) node->parents.push_back(in->node_ptr());
      node->backward_fn = std::move(backward);
    }
  }
  return Tensor<T>(std::move(node));
}

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// reachable leaf that requires them; callers zero parameter gradients first.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.size() != 1) {
    throw NumericError("backward: loss must be scalar, got shape " +
                       shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Visit in reverse creation order. Gradient sums into a shared node then
  // add up in an order fixed by the forward pass alone, so recording extra
  // zero-weighted branches cannot change the result by rounding.
  std::vector<Node<T>*> order{loss.node()};
  std::unordered_set<Node<T>*> visited{loss.node()};
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (auto& p : order[i]->parents)
      if (p->requires_grad && visited.insert(p.get()).second) order.push_back(p.get());
  }
  std::sort(order.begin(), order.end(), [](const Node<T>* a, const Node<T>* b) { return a->sequence < b->sequence; });

  loss.node()->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn && !node->grad.empty()) {
      for (auto& p : node->parents) {
        if (p->requires_grad) p->ensure_grad();
      }
      node->backward_fn(*node);
    }
  }
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace cole::numeric
