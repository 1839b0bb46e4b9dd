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

// Decoupled distillation over each teacher's most confident entities.
//
// The teacher's top ceil(f * |E|) entities form a subset; both distributions
// are restricted to it and renormalized. The loss is a binary KL on the
// target's share plus a KL between the non-target parts.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cole/numeric/functional.hpp"

namespace cole::codistill {

using numeric::Tensor;

class DistillError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DistillConfig {
  double alpha = 0.5;  // text model KD weight
  double beta = 0.8;   // structure model KD weight
  double fraction = 0.5;
  double temperature = 1.0;
  bool full_target_prob = false;  // binary term from the full distributions

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(alpha) || !unit(beta)) throw DistillError("alpha and beta must lie in [0, 1]");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw DistillError("fraction must lie in (0, 1]");
    if (!(temperature > 0.0)) throw DistillError("temperature must be positive");
  }
};

inline std::size_t subset_size(std::size_t entities, double fraction) {
  if (entities < 2) throw DistillError("selection needs at least two entities");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw DistillError("fraction must lie in (0, 1]");
  return std::clamp<std::size_t>(std::size_t(std::ceil(fraction * double(entities))), 1, entities);
}

/// Teacher ranking: descending score, ties by ascending id. The target
/// replaces the last member when it falls outside.
inline std::vector<std::size_t> top_ids(std::span<const double> teacher, std::size_t target, double fraction,
                                        bool* forced = nullptr) {
  if (target >= teacher.size()) throw DistillError("target out of range");
  const std::size_t k = subset_size(teacher.size(), fraction);
  std::vector<std::size_t> ids(teacher.size());
  std::iota(ids.begin(), ids.end(), 0);
  auto before = [&](std::size_t a, std::size_t b) { return teacher[a] > teacher[b] || (teacher[a] == teacher[b] && a < b); };
  std::partial_sort(ids.begin(), ids.begin() + std::ptrdiff_t(k), ids.end(), before);
  ids.resize(k);
  const bool in = std::find(ids.begin(), ids.end(), target) != ids.end();
  if (!in) ids.back() = target;
  if (forced) *forced = !in;
  return ids;
}

/// Renormalized p^(1/T) over `ids`; equivalent to a softmax of logits / T.
inline std::vector<double> restrict_to(std::span<const double> probs, std::span<const std::size_t> ids,
                                       double temperature = 1.0) {
  std::vector<double> out;
  double total = 0;
  for (std::size_t i : ids) {
    const double p = temperature == 1.0 ? probs[i] : std::pow(probs[i], 1.0 / temperature);
    out.push_back(p);
    total += p;
  }
  for (double& v : out) v = total > 0 ? v / total : 1.0 / double(out.size());
  return out;
}

struct SelectedLogits {
  std::vector<std::size_t> ids;  // descending teacher probability
  std::vector<double> teacher, student;
  std::size_t target = 0;
  std::size_t target_position = 0;
  bool target_forced = false;
};

inline SelectedLogits select_top_fraction(std::span<const double> teacher, std::span<const double> student,
                                          std::size_t target, double fraction, double temperature = 1.0) {
  if (teacher.size() != student.size()) throw DistillError("teacher and student differ in length");
  SelectedLogits s;
  s.ids = top_ids(teacher, target, fraction, &s.target_forced);
  s.teacher = restrict_to(teacher, s.ids, temperature);
  s.student = restrict_to(student, s.ids, temperature);
  s.target = target;
  s.target_position = std::size_t(std::find(s.ids.begin(), s.ids.end(), target) - s.ids.begin());
  return s;
}

/// Target share and the renormalized non-target rest of a subset
/// distribution.
inline std::pair<double, std::vector<double>> split_target(std::span<const double> dist, std::size_t pos) {
  const double p = dist[pos];
  std::vector<double> rest;
  double total = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (i == pos) continue;
    rest.push_back(dist[i]);
    total += dist[i];
  }
  for (double& v : rest) v = total > 0 ? v / total : 1.0 / double(rest.size());
  return {p, rest};
}

inline double binary_kl(double p, double q) {
  const double a[2] = {p, 1.0 - p}, b[2] = {q, 1.0 - q};
  return numeric::kl_divergence(a, b);
}

/// Loss on subset distributions with the target at `pos`. `p_teacher` and
/// `p_student`, when given, override the binary term's target shares.
inline double decoupled_kd_loss(std::span<const double> teacher, std::span<const double> student, std::size_t pos,
                                const double* p_teacher = nullptr, const double* p_student = nullptr) {
  if (teacher.size() != student.size() || pos >= teacher.size()) throw DistillError("decoupled_kd_loss: bad subset");
  const auto [pt, rest_t] = split_target(teacher, pos);
  const auto [ps, rest_s] = split_target(student, pos);
  const double binary = binary_kl(p_teacher ? *p_teacher : pt, p_student ? *p_student : ps);
  return binary + (rest_t.empty() ? 0.0 : numeric::kl_divergence(rest_t, rest_s));
}

inline double decoupled_kd_loss(const SelectedLogits& s) {
  return decoupled_kd_loss(s.teacher, s.student, s.target_position);
}

/// Distillation from full teacher/student distributions for one query.
inline double distill_value(std::span<const double> teacher, std::span<const double> student, std::size_t target,
                            const DistillConfig& c) {
  const SelectedLogits s = select_top_fraction(teacher, student, target, c.fraction, c.temperature);
  if (!c.full_target_prob) return decoupled_kd_loss(s);
  const std::vector<std::size_t> all_ids = [&] {
    std::vector<std::size_t> v(teacher.size());
    std::iota(v.begin(), v.end(), 0);
    return v;
  }();
  const double pt = restrict_to(teacher, all_ids, c.temperature)[target];
  const double ps = restrict_to(student, all_ids, c.temperature)[target];
  return decoupled_kd_loss(s.teacher, s.student, s.target_position, &pt, &ps);
}

struct LossPair {
  double structure = 0, text = 0;
};

/// Per-query combined objectives from full distributions:
///   text      = alpha * KD(structure -> text) + (1 - alpha) * CE(text)
///   structure = beta  * KD(text -> structure) + (1 - beta)  * CE(structure)
inline LossPair codistill_losses(std::span<const double> p_structure, std::span<const double> p_text,
                                 std::size_t target, const DistillConfig& c) {
  c.validate();
  LossPair out;
  out.text = c.alpha * distill_value(p_structure, p_text, target, c) +
             (1 - c.alpha) * numeric::cross_entropy(p_text, target);
  out.structure = c.beta * distill_value(p_text, p_structure, target, c) +
                  (1 - c.beta) * numeric::cross_entropy(p_structure, target);
  return out;
}

/// Recorded distillation term summed over a batch. `student_logits` is
/// [n, |E|]; teacher logits are plain values, so no gradient reaches the
/// teacher.
template <typename T>
Tensor<T> distill_batch(const Tensor<T>& student_logits, std::span<const T> teacher_logits,
                        std::span<const std::size_t> targets, const DistillConfig& c) {
  const std::size_t n = student_logits.rows(), e = student_logits.cols();
  if (teacher_logits.size() != n * e || targets.size() != n) throw DistillError("distill_batch: shape mismatch");
  const std::size_t k = subset_size(e, c.fraction);
  const T inv_t = T(1.0 / c.temperature);

  // Columns per row: target first, then the other subset members in order.
  std::vector<std::size_t> flat, flat_target;
  std::vector<double> p_target, p_rest_flat, p_not_target;
  std::vector<double> teacher_probs(e);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = teacher_logits.subspan(r * e, e);
    std::vector<double> scaled(row.begin(), row.end());
    for (double& v : scaled) v *= double(inv_t);
    teacher_probs = numeric::softmax(scaled);
    const auto ids = top_ids(teacher_probs, targets[r], c.fraction);
    std::vector<std::size_t> order{targets[r]};
    for (std::size_t id : ids)
      if (id != targets[r]) order.push_back(id);
    std::vector<double> sub_logits;
    for (std::size_t id : order) {
      flat.push_back(r * e + id);
      sub_logits.push_back(scaled[id]);
    }
    const auto sub = numeric::softmax(sub_logits);
    const auto [pt, rest] = split_target(sub, 0);
    const double p = c.full_target_prob ? teacher_probs[targets[r]] : pt;
    p_target.push_back(p);
    p_not_target.push_back(1.0 - p);
    p_rest_flat.insert(p_rest_flat.end(), rest.begin(), rest.end());
    flat_target.push_back(r * k);
  }

  Tensor<T> q_sub = numeric::softmax_rows(numeric::scale(numeric::gather_elements(student_logits, flat, {n, k}), inv_t));
  Tensor<T> q_t;
  if (c.full_target_prob) {
    std::vector<std::size_t> idx(n);
    for (std::size_t r = 0; r < n; ++r) idx[r] = r * e + targets[r];
    q_t = numeric::gather_elements(numeric::softmax_rows(numeric::scale(student_logits, inv_t)), idx, {n, 1});
  } else {
    q_t = numeric::gather_elements(q_sub, flat_target, {n, 1});
  }
  Tensor<T> loss = numeric::add(numeric::kl_from_constant(p_target, q_t),
                                numeric::kl_from_constant(p_not_target, numeric::add_scalar(numeric::scale(q_t, T(-1)), T(1))));
  if (k > 1) {
    std::vector<std::size_t> rest_idx;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 1; j < k; ++j) rest_idx.push_back(r * k + j);
    Tensor<T> q_rest = numeric::normalize_rows(numeric::gather_elements(q_sub, rest_idx, {n, k - 1}));
    loss = numeric::add(loss, numeric::kl_from_constant(p_rest_flat, q_rest));
  }
  return loss;
}

}  // namespace cole::codistill
