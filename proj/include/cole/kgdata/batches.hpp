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
#include <random>
#include <vector>

#include "cole/kgdata/graph.hpp"

namespace cole::kgdata {

/// One epoch of shuffled mini-batches over the original training triplets.
/// Fisher-Yates by hand so the order depends only on the engine output, not
/// on the standard library's shuffle.
inline std::vector<std::vector<Triplet>> epoch_batches(const KnowledgeGraph& graph, std::size_t batch_size,
                                                       std::mt19937_64& rng) {
  if (batch_size == 0) throw DataError("batch size must be positive");
  std::vector<Triplet> order = graph.original_train();
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = std::size_t(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<Triplet>> out;
  for (std::size_t s = 0; s < order.size(); s += batch_size)
    out.emplace_back(order.begin() + std::ptrdiff_t(s),
                     order.begin() + std::ptrdiff_t(std::min(order.size(), s + batch_size)));
  return out;
}

inline std::size_t batches_per_epoch(const KnowledgeGraph& graph, std::size_t batch_size) {
  return (graph.original_train().size() + batch_size - 1) / batch_size;
}

}  // namespace cole::kgdata
