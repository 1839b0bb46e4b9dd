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

// Small graphs shared by the model tests.

#pragma once

#include <random>
#include <sstream>
#include <string>

#include "cole/kgdata/io.hpp"
#include "cole/numeric/params.hpp"

namespace fixture {

using namespace cole::kgdata;

/// Five entities, two relations, every entity in train.
inline Dataset tiny_dataset() {
  SymbolTable entities, relations;
  for (const char* e : {"a", "b", "c", "d", "e"}) entities.intern(e);
  for (const char* r : {"r0", "r1"}) relations.intern(r);
  std::istringstream train_in("a\tr0\tb\nb\tr0\tc\nc\tr1\td\nd\tr1\te\ne\tr0\ta\na\tr1\tc\nb\tr1\te\n");
  std::istringstream valid_in("c\tr0\td\n");
  std::istringstream test_in("d\tr0\ta\n");
  auto train = load_triplets(train_in, "train", entities, relations);
  auto valid = load_triplets(valid_in, "valid", entities, relations);
  auto test = load_triplets(test_in, "test", entities, relations);
  entities.freeze();
  relations.freeze();
  Dataset d{KnowledgeGraph(std::move(entities), std::move(relations), std::move(train), std::move(valid),
                           std::move(test)),
            {}};
  d.graph.add_reverse_relations();
  d.text.entity_names = {"red fox", "blue owl", "green cat", "pale fox", "dark owl"};
  d.text.relation_names = {"next to", "far from"};
  d.text.entity_descriptions = {"a small red fox .", "an owl that is blue", "", "the fox is pale", "owl , dark"};
  return d;
}

/// Replaces every parameter value with a uniform draw from [-scale, scale]
/// so finite differences see non-trivial curvature.
template <typename T>
void scramble(cole::numeric::ParameterSet<T>& params, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& e : params.entries())
    for (auto& v : e.tensor.mutable_values()) v = T(u(rng));
}

}  // namespace fixture
