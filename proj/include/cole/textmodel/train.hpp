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

#include <random>
#include <string>

#include "cole/kgdata/batches.hpp"
#include "cole/numeric/optim.hpp"
#include "cole/textmodel/text_model.hpp"

namespace cole::textmodel {

struct PreparationStats {
  std::vector<double> warmup_losses;
  std::size_t empty_descriptions = 0;
};

/// Masked-word warm-up followed by the one-shot description initialization
/// of every entity row.
template <typename T>
PreparationStats prepare(TextModel<T>& model) {
  PreparationStats s;
  s.warmup_losses = model.run_warmup(model.config().warmup_steps, model.config().warmup_lr);
  s.empty_descriptions = model.apply_description_init();
  return s;
}

/// One fine-tuning pass over shuffled training batches with neighbor
/// prompts for both sides of each triplet.
template <typename T>
numeric::EpochStats train_epoch(TextModel<T>& model, const KnowledgeGraph& graph, numeric::AdamW<T>& opt,
                                std::size_t batch_size, std::mt19937_64& data_rng) {
  numeric::EpochStats stats;
  double total = 0;
  try {
    for (const auto& batch : kgdata::epoch_batches(graph, batch_size, data_rng)) {
      const auto queries = kgdata::make_queries(graph, batch);
      auto out = model.forward(queries, model.sample_for(graph, queries, true), true);
      Tensor<T> loss = TextModel<T>::text_loss(out, batch.size());
      numeric::ensure_finite(double(loss.item()), "training loss");
      model.parameters().zero_grad();
      numeric::backward(loss);
      opt.step(model.parameters());
      total += double(loss.item());
      ++stats.steps;
    }
  } catch (const numeric::DivergenceError& e) {
    throw numeric::DivergenceError(std::string("text model: ") + e.what());
  }
  stats.mean_loss = stats.steps ? total / double(stats.steps) : 0.0;
  return stats;
}

}  // namespace cole::textmodel
