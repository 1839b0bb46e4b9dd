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

// Deterministic synthetic knowledge graph used by tests, the acceptance suite
// and the `make-toy` command.
//
// Entity i has a color a = i % 10 and an animal b = i / 10 and is named
// "<color> <animal>". Relations move on this 10 x 5 torus:
//   next_animal (b+1), next_color (a+1), previous_animal (b-1),
//   previous_color (a-1), distant_animal (b+2 and b+3).
// That is 50 entities, 5 relations and 300 triplets, split 240/30/30.

#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cole/kgdata/io.hpp"

namespace cole::kgdata {

struct ToyOptions {
  std::size_t valid_count = 30;
  std::size_t test_count = 30;
  std::uint64_t split_seed = 7;
};

namespace detail {

inline constexpr std::array<const char*, 10> kColors = {"red",    "orange", "yellow", "green", "blue",
                                                        "indigo", "violet", "black",  "white", "gray"};
inline constexpr std::array<const char*, 5> kAnimals = {"fox", "owl", "bear", "wolf", "hare"};

struct ToyRelation {
  const char* symbol;
  const char* name;
};
inline constexpr std::array<ToyRelation, 5> kToyRelations = {{
    {"/toy/next_animal", "next animal"},
    {"/toy/next_color", "next color"},
    {"/toy/previous_animal", "previous animal"},
    {"/toy/previous_color", "previous color"},
    {"/toy/distant_animal", "distant animal"},
}};

inline std::string toy_symbol(std::size_t i) { return "/toy/e" + std::to_string(i); }

}  // namespace detail

/// Raw TSV lines of the toy dataset, keyed by file name.
struct ToyFiles {
  std::vector<std::string> train, valid, test, entity_names, relation_names, descriptions;
};

inline ToyFiles make_toy_files(const ToyOptions& options = {}) {
  using detail::kAnimals;
  using detail::kColors;
  constexpr std::size_t kEntities = 50;
  auto entity = [](std::size_t color, std::size_t animal) { return (animal % 5) * 10 + (color % 10); };

  std::vector<std::array<std::size_t, 3>> triplets;
  for (std::size_t i = 0; i < kEntities; ++i) {
    const std::size_t a = i % 10, b = i / 10;
    triplets.push_back({i, 0, entity(a, b + 1)});
    triplets.push_back({i, 1, entity(a + 1, b)});
    triplets.push_back({i, 2, entity(a, b + 4)});
    triplets.push_back({i, 3, entity(a + 9, b)});
    triplets.push_back({i, 4, entity(a, b + 2)});
    triplets.push_back({i, 4, entity(a, b + 3)});
  }

  // Reshuffle until every entity and relation keeps at least one training edge.
  std::mt19937_64 rng(options.split_seed);
  const std::size_t held_out = options.valid_count + options.test_count;
  while (true) {
    std::shuffle(triplets.begin(), triplets.end(), rng);
    std::vector<bool> covered(kEntities, false);
    std::array<bool, 5> rel_covered{};
    for (std::size_t i = held_out; i < triplets.size(); ++i) {
      covered[triplets[i][0]] = covered[triplets[i][2]] = true;
      rel_covered[triplets[i][1]] = true;
    }
    if (std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }) &&
        std::all_of(rel_covered.begin(), rel_covered.end(), [](bool b) { return b; }))
      break;
  }

  ToyFiles files;
  auto line = [](const std::array<std::size_t, 3>& t) {
    return detail::toy_symbol(t[0]) + "\t" + detail::kToyRelations[t[1]].symbol + "\t" + detail::toy_symbol(t[2]);
  };
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    if (i < options.test_count) files.test.push_back(line(triplets[i]));
    else if (i < held_out) files.valid.push_back(line(triplets[i]));
    else files.train.push_back(line(triplets[i]));
  }
  for (std::size_t i = 0; i < kEntities; ++i) {
    const std::string color = kColors[i % 10], animal = kAnimals[i / 10];
    files.entity_names.push_back(detail::toy_symbol(i) + "\t" + color + " " + animal);
    files.descriptions.push_back(detail::toy_symbol(i) + "\tthe " + color + " " + animal + " is a " + animal +
                                 " with " + color + " fur.");
  }
  for (const auto& r : detail::kToyRelations) files.relation_names.push_back(std::string(r.symbol) + "\t" + r.name);
  return files;
}

inline void write_toy_dataset(const std::filesystem::path& dir, const ToyOptions& options = {}) {
  std::filesystem::create_directories(dir);
  const ToyFiles f = make_toy_files(options);
  auto write = [&](const char* name, const std::vector<std::string>& lines) {
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_file_text(dir / name, text);
  };
  write(kSplitFiles[0], f.train);
  write(kSplitFiles[1], f.valid);
  write(kSplitFiles[2], f.test);
  write(kEntityNamesFile, f.entity_names);
  write(kRelationNamesFile, f.relation_names);
  write(kDescriptionsFile, f.descriptions);
}

/// The toy dataset loaded in memory through the regular TSV path.
inline Dataset make_toy_dataset(const ToyOptions& options = {}) {
  const ToyFiles f = make_toy_files(options);
  SymbolTable entities, relations;
  // Fix id order to the natural entity/relation numbering.
  for (std::size_t i = 0; i < 50; ++i) entities.intern(detail::toy_symbol(i));
  for (const auto& r : detail::kToyRelations) relations.intern(r.symbol);
  entities.freeze();
  relations.freeze();
  auto parse = [&](const std::vector<std::string>& lines, const char* name) {
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    std::istringstream in(text);
    return load_triplets(in, name, entities, relations);
  };
  auto train = parse(f.train, "train"), valid = parse(f.valid, "valid"), test = parse(f.test, "test");
  Dataset ds;
  auto second_field = [](const std::string& l) { return l.substr(l.find('\t') + 1); };
  for (const auto& l : f.entity_names) ds.text.entity_names.push_back(second_field(l));
  for (const auto& l : f.relation_names) ds.text.relation_names.push_back(second_field(l));
  for (const auto& l : f.descriptions) ds.text.entity_descriptions.push_back(second_field(l));
  ds.graph = KnowledgeGraph(std::move(entities), std::move(relations), std::move(train), std::move(valid),
                            std::move(test));
  return ds;
}

}  // namespace cole::kgdata
