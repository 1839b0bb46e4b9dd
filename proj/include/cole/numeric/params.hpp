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

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cole/numeric/tensor.hpp"

namespace cole::numeric {

/// Standard deviation of the truncated-normal initializer.
inline constexpr double kInitStddev = 0.02;

/// Normal(0, stddev) resampled until within two standard deviations.
template <typename T, typename Rng>
std::vector<T> truncated_normal(std::size_t count, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> out(count);
  for (T& v : out) {
    double z = normal(rng);
    while (z < -2.0 || z > 2.0) z = normal(rng);
    v = T(z * stddev);
  }
  return out;
}

enum class Init { kTruncatedNormal, kZeros, kOnes };

/// Named, ordered collection of trainable leaves. Registration order is the
/// serialization order.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool weight_decay = true;
  };

  template <typename Rng>
  Tensor<T> add(std::string name, Shape shape, Init init, Rng& rng) {
    const std::size_t count = element_count(shape);
    std::vector<T> values;
    switch (init) {
      case Init::kTruncatedNormal: values = truncated_normal<T>(count, kInitStddev, rng); break;
      case Init::kZeros: values.assign(count, T(0)); break;
      case Init::kOnes: values.assign(count, T(1)); break;
    }
    for (const Entry& e : entries_) {
      if (e.name == name) throw NumericError("duplicate parameter name: " + name);
    }
    Tensor<T> t = Tensor<T>::parameter(std::move(shape), std::move(values));
    entries_.push_back({std::move(name), t, init == Init::kTruncatedNormal});
    return t;
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  const Tensor<T>* find(std::string_view name) const {
    for (const Entry& e : entries_)
      if (e.name == name) return &e.tensor;
    return nullptr;
  }

  std::size_t scalar_count() const {
    std::size_t total = 0;
    for (const Entry& e : entries_) total += e.tensor.size();
    return total;
  }

  void zero_grad() {
    for (Entry& e : entries_) e.tensor.zero_grad();
  }

  /// Deep copy of all parameter values, in registration order.
  std::vector<std::vector<T>> snapshot() const {
    std::vector<std::vector<T>> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_) out.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
    return out;
  }

  void restore(const std::vector<std::vector<T>>& values) {
    if (values.size() != entries_.size()) throw NumericError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      auto dst = entries_[i].tensor.mutable_values();
      if (dst.size() != values[i].size()) throw NumericError("restore: size mismatch for " + entries_[i].name);
      std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace cole::numeric
