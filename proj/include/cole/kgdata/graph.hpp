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
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cole::kgdata {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense index into a symbol table; the tag keeps entity and relation ids apart.
template <typename Tag>
struct Id {
  std::int32_t value = 0;

  constexpr std::size_t index() const { return static_cast<std::size_t>(value); }
  friend constexpr auto operator<=>(Id, Id) = default;
};

using EntityId = Id<struct EntityTag>;
using RelationId = Id<struct RelationTag>;

inline constexpr EntityId entity_at(std::size_t i) { return EntityId{static_cast<std::int32_t>(i)}; }
inline constexpr RelationId relation_at(std::size_t i) { return RelationId{static_cast<std::int32_t>(i)}; }

struct Triplet {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend constexpr auto operator<=>(const Triplet&, const Triplet&) = default;
};

/// A relational neighbor: the other endpoint and the connecting relation.
struct Neighbor {
  EntityId entity;
  RelationId relation;

  friend constexpr bool operator==(const Neighbor&, const Neighbor&) = default;
  friend constexpr auto operator<=>(const Neighbor& a, const Neighbor& b) {
    if (auto c = a.relation <=> b.relation; c != 0) return c;
    return a.entity <=> b.entity;
  }
};

enum class Direction { kIn, kOut };
enum class Split { kTrain, kValid, kTest };

/// Insertion-ordered string interning. Frozen tables reject new symbols.
class SymbolTable {
 public:
  std::int32_t intern(const std::string& symbol) {
    if (auto it = index_.find(symbol); it != index_.end()) return it->second;
    if (frozen_) throw DataError("unknown symbol '" + symbol + "'");
    const auto id = static_cast<std::int32_t>(names_.size());
    names_.push_back(symbol);
    index_.emplace(symbol, id);
    return id;
  }

  std::optional<std::int32_t> find(const std::string& symbol) const {
    if (auto it = index_.find(symbol); it != index_.end()) return it->second;
    return std::nullopt;
  }

  const std::string& name(std::size_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  void freeze() { frozen_ = true; }
  void thaw() { frozen_ = false; }
  bool frozen() const { return frozen_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> index_;
  bool frozen_ = false;
};

/// Human-readable side information, indexed by id. Only original relations
/// carry names; reverses are nameless by construction.
struct TextStore {
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;
  std::vector<std::string> entity_descriptions;

  const std::string& entity_name(EntityId e) const { return entity_names.at(e.index()); }
  const std::string& relation_name(RelationId r) const { return relation_names.at(r.index()); }
  const std::string& description(EntityId e) const { return entity_descriptions.at(e.index()); }
};

/// Entities, relations and splits of one dataset. After `add_reverse_relations`
/// relation ids [R, 2R) are the reverses of [0, R) and the training set holds
/// both directions.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(SymbolTable entities, SymbolTable relations, std::vector<Triplet> train,
                 std::vector<Triplet> valid, std::vector<Triplet> test)
      : entities_(std::move(entities)),
        relations_(std::move(relations)),
        original_train_(std::move(train)),
        valid_(std::move(valid)),
        test_(std::move(test)) {
    validate();
    train_ = original_train_;
    rebuild_indices();
  }

  /// Adds (t, r^-, h) for every training (h, r, t). May be called once.
  void add_reverse_relations() {
    if (augmented_) throw DataError("reverse relations already added");
    augmented_ = true;
    train_.clear();
    train_.reserve(2 * original_train_.size());
    for (const Triplet& t : original_train_) train_.push_back(t);
    for (const Triplet& t : original_train_) train_.push_back(reversed(t));
    rebuild_indices();
  }

  bool augmented() const { return augmented_; }

  const SymbolTable& entities() const { return entities_; }
  const SymbolTable& relation_symbols() const { return relations_; }
  std::size_t entity_count() const { return entities_.size(); }
  std::size_t original_relation_count() const { return relations_.size(); }
  /// Size of the structure-side relation table (reverses included once added).
  std::size_t relation_count() const { return augmented_ ? 2 * relations_.size() : relations_.size(); }

  bool is_reverse(RelationId r) const { return r.index() >= relations_.size(); }
  RelationId reverse(RelationId r) const {
    const auto n = static_cast<std::int32_t>(relations_.size());
    return RelationId{r.value < n ? r.value + n : r.value - n};
  }
  Triplet reversed(const Triplet& t) const { return {t.tail, reverse(t.relation), t.head}; }

  std::string relation_label(RelationId r) const {
    return is_reverse(r) ? relations_.name(reverse(r).index()) + "^-1" : relations_.name(r.index());
  }

  /// Training triplets in the structure view (both directions once augmented).
  const std::vector<Triplet>& train() const { return train_; }
  const std::vector<Triplet>& original_train() const { return original_train_; }
  const std::vector<Triplet>& valid() const { return valid_; }
  const std::vector<Triplet>& test() const { return test_; }
  const std::vector<Triplet>& split(Split s) const {
    switch (s) {
      case Split::kTrain: return original_train_;
      case Split::kValid: return valid_;
      case Split::kTest: return test_;
    }
    return test_;
  }

  /// In: {(h', r') | (h', r', e) in train}. Out: {(t', r') | (e, r', t') in train}.
  /// Sorted by (relation, entity); built from the training split only.
  std::span<const Neighbor> neighbors(EntityId e, Direction dir) const {
    const auto& index = dir == Direction::kIn ? in_index_ : out_index_;
    return index.at(e.index());
  }

  /// Number of training triplets incident to `e` (either end, original direction).
  std::size_t degree(EntityId e) const {
    std::size_t d = in_index_.at(e.index()).size();
    if (!augmented_) d += out_index_.at(e.index()).size();
    return d;
  }

  /// Every t with (source, relation, t) true in any split; relation may be a
  /// reverse once augmented. Unknown queries yield an empty set.
  std::span<const EntityId> filter_set(EntityId source, RelationId relation) const {
    auto it = filter_.find(key(source, relation));
    if (it == filter_.end()) return {};
    return it->second;
  }

 private:
  static std::uint64_t key(EntityId s, RelationId r) {
    return (std::uint64_t(std::uint32_t(s.value)) << 32) | std::uint32_t(r.value);
  }

  void validate() const {
    auto check = [&](const std::vector<Triplet>& ts, const char* split) {
      for (const Triplet& t : ts) {
        if (t.head.index() >= entities_.size() || t.tail.index() >= entities_.size() ||
            t.relation.index() >= relations_.size()) {
          throw DataError(std::string("triplet with out-of-range id in ") + split);
        }
      }
    };
    check(original_train_, "train");
    check(valid_, "valid");
    check(test_, "test");
  }

  void rebuild_indices() {
    in_index_.assign(entities_.size(), {});
    out_index_.assign(entities_.size(), {});
    for (const Triplet& t : train_) {
      in_index_[t.tail.index()].push_back({t.head, t.relation});
      out_index_[t.head.index()].push_back({t.tail, t.relation});
    }
    for (auto* index : {&in_index_, &out_index_}) {
      for (auto& list : *index) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
      }
    }

    filter_.clear();
    auto insert = [&](const Triplet& t) { filter_[key(t.head, t.relation)].push_back(t.tail); };
    for (const auto* split : {&original_train_, &valid_, &test_}) {
      for (const Triplet& t : *split) {
        insert(t);
        if (augmented_) insert(reversed(t));
      }
    }
    for (auto& [k, list] : filter_) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
  }

  SymbolTable entities_;
  SymbolTable relations_;
  std::vector<Triplet> original_train_;
  std::vector<Triplet> train_;
  std::vector<Triplet> valid_;
  std::vector<Triplet> test_;
  bool augmented_ = false;
  std::vector<std::vector<Neighbor>> in_index_;
  std::vector<std::vector<Neighbor>> out_index_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> filter_;
};

/// Uniform sample of at most `k` entries without replacement, after dropping
/// `exclude`. Deterministic for a fixed seed; input order is canonical.
inline std::vector<Neighbor> sample_from(std::span<const Neighbor> pool, std::size_t k, std::uint64_t seed,
                                         std::optional<Neighbor> exclude = std::nullopt) {
  std::vector<Neighbor> candidates;
  candidates.reserve(pool.size());
  for (const Neighbor& n : pool) {
    if (!exclude || !(n == *exclude)) candidates.push_back(n);
  }
  if (candidates.size() <= k) return candidates;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(k);
  return candidates;
}

inline std::vector<Neighbor> sample_neighbors(const KnowledgeGraph& graph, EntityId e, std::size_t k,
                                              std::uint64_t seed, std::optional<Neighbor> exclude = std::nullopt) {
  return sample_from(graph.neighbors(e, Direction::kIn), k, seed, exclude);
}

/// Link-prediction query. Head-side queries are stored in the structure
/// convention: (tail, relation^-, ?) predicting the head.
enum class Side { kHead, kTail };

struct Query {
  EntityId source;      // the seen entity
  RelationId relation;  // structure-side relation (reverse for head queries)
  EntityId target;
  Side side = Side::kTail;
  Triplet triplet;  // original-direction triplet the query came from
};

/// Tail and head queries for every triplet of `split`, in triplet order.
inline std::vector<Query> make_queries(const KnowledgeGraph& graph, std::span<const Triplet> triplets) {
  if (!graph.augmented()) throw DataError("head queries need reverse relations");
  std::vector<Query> out;
  out.reserve(2 * triplets.size());
  for (const Triplet& t : triplets) {
    out.push_back({t.head, t.relation, t.tail, Side::kTail, t});
    out.push_back({t.tail, graph.reverse(t.relation), t.head, Side::kHead, t});
  }
  return out;
}

}  // namespace cole::kgdata
