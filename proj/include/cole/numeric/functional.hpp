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

// Probability utilities on plain values (no graph recording), plus their
// graph-recording counterparts used by the training losses.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cole/numeric/ops.hpp"

namespace cole::numeric {

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  detail::softmax_inplace(out.data(), out.size());
  return out;
}

/// -sum_j label_j * log(max(probs_j, eps))
inline double cross_entropy(std::span<const double> probs, std::span<const double> label) {
  detail::require(probs.size() == label.size(), "cross_entropy: size mismatch");
  double loss = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (label[j] != 0.0) loss -= label[j] * std::log(std::max(probs[j], kLogEpsilon));
  }
  return loss;
}

inline double cross_entropy(std::span<const double> probs, std::size_t label_index) {
  detail::require(label_index < probs.size(), "cross_entropy: label out of range");
  return -std::log(std::max(probs[label_index], kLogEpsilon));
}

/// KL(p || q), both clamped at eps inside the logarithms.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  detail::require(p.size() == q.size(), "kl_divergence: size mismatch");
  double total = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] <= 0.0) continue;
    total += p[j] * (std::log(std::max(p[j], kLogEpsilon)) - std::log(std::max(q[j], kLogEpsilon)));
  }
  return total;
}

/// Per-row cross-entropy of probability rows against integer targets, shape
/// [rows, 1]. With smoothing s the label puts 1-s on the target and s/V on
/// every entry.
template <typename T>
Tensor<T> cross_entropy_rows(const Tensor<T>& probs, std::span<const std::size_t> targets,
                             double smoothing = 0.0) {
  const std::size_t m = probs.rows(), n = probs.cols();
  detail::require(targets.size() == m, "cross_entropy_rows: one target per row required");
  std::vector<std::size_t> flat(m);
  for (std::size_t r = 0; r < m; ++r) {
    detail::require(targets[r] < n, "cross_entropy_rows: target out of range");
    flat[r] = r * n + targets[r];
  }
  Tensor<T> picked = log_clamped(gather_elements(probs, std::move(flat), {m, 1}));
  if (smoothing <= 0.0) return scale(picked, T(-1));
  Tensor<T> spread = sum_rows(log_clamped(probs));
  return add(scale(picked, T(-(1.0 - smoothing))), scale(spread, T(-smoothing / double(n))));
}

/// KL(p || Q) for a constant distribution p and a recorded distribution Q
/// (both 1 x n). Gradient flows into Q only.
template <typename T>
Tensor<T> kl_from_constant(std::span<const double> p, const Tensor<T>& q) {
  detail::require(p.size() == q.size(), "kl_from_constant: size mismatch");
  double entropy_term = 0;
  std::vector<T> weights(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    weights[j] = T(p[j]);
    if (p[j] > 0.0) entropy_term += p[j] * std::log(std::max(p[j], kLogEpsilon));
  }
  Tensor<T> w = Tensor<T>::from_values(q.shape(), std::move(weights));
  return add_scalar(scale(sum_all(mul(w, log_clamped(q))), T(-1)), T(entropy_term));
}

}  // namespace cole::numeric
