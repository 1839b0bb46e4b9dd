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
#include "cole/nformer/nformer.hpp"
#include "cole/numeric/optim.hpp"

namespace cole::nformer {

/// One pass over shuffled training batches; each triplet yields a tail and
/// a head query.
template <typename T>
numeric::EpochStats train_epoch(NFormer<T>& model, const KnowledgeGraph& graph, numeric::AdamW<T>& opt,
                                std::size_t batch_size, std::mt19937_64& data_rng) {
  numeric::EpochStats stats;
  double total = 0;
  try {
    for (const auto& batch : kgdata::epoch_batches(graph, batch_size, data_rng)) {
      const auto queries = kgdata::make_queries(graph, batch);
      auto out = model.forward(queries, model.sample_for(graph, queries, true), true);
      Tensor<T> loss = NFormer<T>::structure_loss(out);
      numeric::ensure_finite(double(loss.item()), "training loss");
      model.parameters().zero_grad();
      numeric::backward(loss);
      opt.step(model.parameters());
      total += double(loss.item());
      ++stats.steps;
    }
  } catch (const numeric::DivergenceError& e) {
    throw numeric::DivergenceError(std::string("nformer model: ") + e.what());
  }
  stats.mean_loss = stats.steps ? total / double(stats.steps) : 0.0;
  return stats;
}

}  // namespace cole::nformer
