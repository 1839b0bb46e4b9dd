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
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "cole/numeric/params.hpp"

namespace cole::numeric {

/// Linear warm-up to the base rate, then cosine decay to zero.
struct LrSchedule {
  double base_lr = 1e-3;
  std::uint64_t warmup_steps = 0;
  std::uint64_t total_steps = 1;
};

inline double lr_at(std::uint64_t step, const LrSchedule& s) {
  step = std::min(step, s.total_steps);
  if (step < s.warmup_steps) {
    return s.base_lr * double(step) / double(s.warmup_steps);
  }
  if (s.total_steps <= s.warmup_steps) return s.base_lr;
  const double progress = double(step - s.warmup_steps) / double(s.total_steps - s.warmup_steps);
  return s.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Moments and step counter, one moment pair per registered parameter.
template <typename T>
struct OptimizerState {
  std::uint64_t step = 0;
  AdamWConfig config;
  LrSchedule schedule;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
};

template <typename T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParameterSet<T>& params, AdamWConfig config, LrSchedule schedule) {
    state_.config = config;
    state_.schedule = schedule;
    for (const auto& e : params.entries()) {
      state_.first_moment.emplace_back(e.tensor.size(), T(0));
      state_.second_moment.emplace_back(e.tensor.size(), T(0));
    }
  }

  /// One update using the gradients currently stored on `params` and the
  /// scheduled rate for the upcoming step.
  void step(ParameterSet<T>& params) { step(params, lr_at(state_.step + 1, state_.schedule)); }

  /// Decoupled weight decay: the parameter shrinks by lr * lambda * param
  /// independently of the adaptive gradient step.
  void step(ParameterSet<T>& params, double lr) {
    auto& entries = params.entries();
    if (entries.size() != state_.first_moment.size()) {
      throw NumericError("AdamW: parameter set does not match optimizer state");
    }
    ++state_.step;
    const AdamWConfig& c = state_.config;
    const double bc1 = 1.0 - std::pow(c.beta1, double(state_.step));
    const double bc2 = 1.0 - std::pow(c.beta2, double(state_.step));
    for (std::size_t p = 0; p < entries.size(); ++p) {
      auto values = entries[p].tensor.mutable_values();
      auto grads = entries[p].tensor.grad();
      auto& m = state_.first_moment[p];
      auto& v = state_.second_moment[p];
      const double decay = entries[p].weight_decay ? c.weight_decay : 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = grads.empty() ? 0.0 : double(grads[i]);
        m[i] = T(c.beta1 * double(m[i]) + (1.0 - c.beta1) * g);
        v[i] = T(c.beta2 * double(v[i]) + (1.0 - c.beta2) * g * g);
        const double m_hat = double(m[i]) / bc1;
        const double v_hat = double(v[i]) / bc2;
        double x = double(values[i]);
        x -= lr * decay * x;
        x -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
        values[i] = T(x);
      }
    }
  }

  const OptimizerState<T>& state() const { return state_; }
  OptimizerState<T>& state() { return state_; }

 private:
  OptimizerState<T> state_;
};

/// Per-epoch training summary.
struct EpochStats {
  double mean_loss = 0;
  std::size_t steps = 0;
};

/// Throws DivergenceError naming `who` when `loss` is NaN or infinite.
inline void ensure_finite(double loss, const std::string& who) {
  if (!std::isfinite(loss)) throw DivergenceError(who + ": non-finite loss " + std::to_string(loss));
}

}  // namespace cole::numeric
