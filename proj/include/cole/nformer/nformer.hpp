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

// Structure model. A query (h, r, ?) is encoded as the three-token sequence
// <h, r, [MASK]>; the [MASK] output goes through an MLP head and is scored
// against every entity embedding. The neighborhood path first encodes
// <h', r', [MASK]> for sampled in-neighbors (h', r') of h with the same
// encoder, sums those outputs and averages the sum with E_h in slot 0.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "cole/common/random.hpp"
#include "cole/kgdata/graph.hpp"
#include "cole/numeric/encoder.hpp"
#include "cole/numeric/functional.hpp"
#include "cole/numeric/optim.hpp"

namespace cole::nformer {

using kgdata::EntityId;
using kgdata::KnowledgeGraph;
using kgdata::Neighbor;
using kgdata::Query;
using kgdata::RelationId;
using numeric::Tensor;

struct NFormerConfig {
  numeric::EncoderShape shape{64, 2, 2, 0};
  double dropout = 0.1;
  std::size_t neighbors = 4;
  bool normalize_neighbors = false;  // divide the neighbor sum by its count
  double label_smoothing = 0.0;
};

/// Outputs of one batched forward pass; row i belongs to query i.
template <typename T>
struct StructureOutputs {
  Tensor<T> plain_logits, neighbor_logits;  // [n, |E|]
  Tensor<T> plain_probs, neighbor_probs;    // [n, |E|]
  Tensor<T> plain_ce, neighbor_ce;          // [n, 1]; defined when targets are known
  std::vector<std::vector<Neighbor>> sampled;
};

template <typename T>
class NFormer {
 public:
  NFormer(const NFormerConfig& config, std::size_t entity_count, std::size_t relation_count, std::uint64_t seed)
      : config_(config), entity_count_(entity_count), rng_(derive_seed({seed, 0x6e666f726dULL})) {
    std::mt19937_64 init(derive_seed({seed, 0x696e6974ULL}));
    const std::size_t d = config.shape.dim;
    entity_ = params_.add("nformer.entity", {entity_count, d}, numeric::Init::kTruncatedNormal, init);
    relation_ = params_.add("nformer.relation", {relation_count, d}, numeric::Init::kTruncatedNormal, init);
    mask_ = params_.add("nformer.mask", {1, d}, numeric::Init::kTruncatedNormal, init);
    position_ = params_.add("nformer.position", {3, d}, numeric::Init::kTruncatedNormal, init);
    input_ln_gain_ = params_.add("nformer.input.ln.gain", {d}, numeric::Init::kOnes, init);
    input_ln_bias_ = params_.add("nformer.input.ln.bias", {d}, numeric::Init::kZeros, init);
    encoder_ = numeric::EncoderParams<T>::create(config.shape, params_, "nformer.encoder", init);
    head_w_ = params_.add("nformer.head.w", {d, d}, numeric::Init::kTruncatedNormal, init);
    head_b_ = params_.add("nformer.head.b", {d}, numeric::Init::kZeros, init);
    head_ln_gain_ = params_.add("nformer.head.ln.gain", {d}, numeric::Init::kOnes, init);
    head_ln_bias_ = params_.add("nformer.head.ln.bias", {d}, numeric::Init::kZeros, init);
  }

  const NFormerConfig& config() const { return config_; }
  std::size_t entity_count() const { return entity_count_; }
  numeric::ParameterSet<T>& parameters() { return params_; }
  const numeric::ParameterSet<T>& parameters() const { return params_; }
  const numeric::EncoderParams<T>& encoder() const { return encoder_; }
  std::mt19937_64& rng() { return rng_; }

  /// [MASK] output of <h, r, [MASK]>, shape [1, d].
  Tensor<T> reconstruct_from_triplet(EntityId source, RelationId relation) const {
    return encode_triplets(numeric::gather_rows(entity_, {source.index()}), {relation.index()}, {});
  }

  /// Sum of neighbor reconstructions, shape [1, d]; zero for an empty list.
  Tensor<T> neighborhood_embedding(std::span<const Neighbor> neighbors) const {
    if (neighbors.empty()) return Tensor<T>::zeros({1, config_.shape.dim});
    std::vector<std::size_t> heads, rels;
    for (const Neighbor& n : neighbors) {
      heads.push_back(n.entity.index());
      rels.push_back(n.relation.index());
    }
    Tensor<T> each = encode_triplets(numeric::gather_rows(entity_, heads), rels, {});
    return numeric::scatter_add_rows(each, std::vector<std::size_t>(neighbors.size(), 0), 1);
  }

  /// Encoder applied to <mean(E_h, neighborhood), r, [MASK]>; E_h alone when
  /// there are no neighbors.
  Tensor<T> reconstruct_with_neighborhood(EntityId source, RelationId relation,
                                          std::span<const Neighbor> neighbors) const {
    if (neighbors.empty()) return reconstruct_from_triplet(source, relation);
    const auto [a, b] = mix_coefficients(neighbors.size());
    Tensor<T> first = numeric::add(numeric::scale(numeric::gather_rows(entity_, {source.index()}), a),
                                   numeric::scale(neighborhood_embedding(neighbors), b));
    return encode_triplets(first, {relation.index()}, {});
  }

  /// Entity logits for reconstructions [n, d] -> [n, |E|].
  Tensor<T> predict_logits(const Tensor<T>& reconstruction) const {
    Tensor<T> hidden = numeric::gelu(numeric::linear(reconstruction, head_w_, head_b_));
    hidden = numeric::layer_norm(hidden, head_ln_gain_, head_ln_bias_);
    return numeric::matmul_nt(hidden, entity_);
  }

  /// Neighbor lists for a batch. Training draws from the model's stream and
  /// drops the query's own reverse edge; inference derives a fixed seed from
  /// the query so results do not depend on batch composition.
  std::vector<std::vector<Neighbor>> sample_for(const KnowledgeGraph& graph, std::span<const Query> queries,
                                                bool training) {
    std::vector<std::vector<Neighbor>> out;
    out.reserve(queries.size());
    for (const Query& q : queries) {
      if (training) {
        const Neighbor leak{q.target, graph.reverse(q.relation)};
        out.push_back(kgdata::sample_neighbors(graph, q.source, config_.neighbors, rng_(), leak));
      } else {
        out.push_back(sample_inference(graph, q));
      }
    }
    return out;
  }

  std::vector<Neighbor> sample_inference(const KnowledgeGraph& graph, const Query& q) const {
    const std::uint64_t seed = derive_seed({0x6576616cULL, q.source.index(), q.relation.index()});
    return kgdata::sample_neighbors(graph, q.source, config_.neighbors, seed);
  }

  /// Batched forward over both paths. With `training` set, dropout draws
  /// from the model stream; targets (when given) produce per-query CE.
  StructureOutputs<T> forward(std::span<const Query> queries, std::vector<std::vector<Neighbor>> sampled,
                              bool training, bool with_targets = true) {
    numeric::PassMode mode;
    if (training) mode = {config_.dropout, &rng_};
    return forward_impl(queries, std::move(sampled), mode, with_targets);
  }

  /// Inference-only forward (no dropout); safe to call concurrently.
  StructureOutputs<T> infer(const KnowledgeGraph& graph, std::span<const Query> queries) const {
    std::vector<std::vector<Neighbor>> sampled;
    for (const Query& q : queries) sampled.push_back(sample_inference(graph, q));
    return forward_impl(queries, std::move(sampled), {}, false);
  }

  /// Mean over the batch of CE(plain) + CE(neighborhood).
  static Tensor<T> structure_loss(const StructureOutputs<T>& out) {
    return numeric::mean_all(numeric::add(out.plain_ce, out.neighbor_ce));
  }

 private:
  std::pair<T, T> mix_coefficients(std::size_t count) const {
    const T b = config_.normalize_neighbors ? T(0.5) / T(count) : T(0.5);
    return {T(0.5), b};
  }

  /// Encodes <first_i, r_i, [MASK]> for every row of `first`, returning the
  /// [MASK] outputs [S, d].
  Tensor<T> encode_triplets(const Tensor<T>& first, const std::vector<std::size_t>& relations,
                            const numeric::PassMode& mode) const {
    const std::size_t s = relations.size();
    std::vector<std::size_t> slot0(s), slot1(s), slot2(s), positions(3 * s), zeros(s, 0);
    for (std::size_t i = 0; i < s; ++i) {
      slot0[i] = 3 * i;
      slot1[i] = 3 * i + 1;
      slot2[i] = 3 * i + 2;
      positions[3 * i] = 0;
      positions[3 * i + 1] = 1;
      positions[3 * i + 2] = 2;
    }
    Tensor<T> x = numeric::scatter_add_rows(first, slot0, 3 * s);
    x = numeric::add(x, numeric::scatter_add_rows(numeric::gather_rows(relation_, relations), slot1, 3 * s));
    x = numeric::add(x, numeric::scatter_add_rows(numeric::gather_rows(mask_, zeros), slot2, 3 * s));
    x = numeric::add(x, numeric::gather_rows(position_, positions));
    // Normalizing the summed inputs keeps E_h, r and the neighbor sum (which
    // comes out of a layer norm) on one scale.
    x = numeric::layer_norm(x, input_ln_gain_, input_ln_bias_);
    Tensor<T> h = numeric::encode_sequences(x, numeric::uniform_segments(s, 3), encoder_, mode);
    return numeric::gather_rows(h, slot2);
  }

  StructureOutputs<T> forward_impl(std::span<const Query> queries, std::vector<std::vector<Neighbor>> sampled,
                                   const numeric::PassMode& mode, bool with_targets) const {
    const std::size_t n = queries.size();
    if (sampled.size() != n) throw numeric::NumericError("nformer: one neighbor list per query required");
    std::vector<std::size_t> sources(n), relations(n), targets(n);
    std::vector<std::size_t> heads, rels, owners;
    for (std::size_t i = 0; i < n; ++i) {
      sources[i] = queries[i].source.index();
      relations[i] = queries[i].relation.index();
      targets[i] = queries[i].target.index();
      heads.push_back(sources[i]);
      rels.push_back(relations[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (const Neighbor& nb : sampled[i]) {
        heads.push_back(nb.entity.index());
        rels.push_back(nb.relation.index());
        owners.push_back(i);
      }
    }
    // Pass 1: plain queries followed by every neighbor triplet.
    Tensor<T> recon = encode_triplets(numeric::gather_rows(entity_, heads), rels, mode);
    std::vector<std::size_t> plain_rows(n), nbr_rows(owners.size());
    for (std::size_t i = 0; i < n; ++i) plain_rows[i] = i;
    for (std::size_t j = 0; j < owners.size(); ++j) nbr_rows[j] = n + j;
    Tensor<T> plain = numeric::gather_rows(recon, plain_rows);
    Tensor<T> nbr_sum = numeric::scatter_add_rows(numeric::gather_rows(recon, nbr_rows), owners, n);

    // Pass 2: slot 0 becomes the two-way mean (or E_h for isolated queries).
    std::vector<T> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (sampled[i].empty()) {
        a[i] = T(1);
        b[i] = T(0);
      } else {
        std::tie(a[i], b[i]) = mix_coefficients(sampled[i].size());
      }
    }
    Tensor<T> first = numeric::add(numeric::scale_rows(numeric::gather_rows(entity_, sources), std::move(a)),
                                   numeric::scale_rows(nbr_sum, std::move(b)));
    Tensor<T> with_nbr = encode_triplets(first, relations, mode);

    StructureOutputs<T> out;
    out.plain_logits = predict_logits(plain);
    out.neighbor_logits = predict_logits(with_nbr);
    out.plain_probs = numeric::softmax_rows(out.plain_logits);
    out.neighbor_probs = numeric::softmax_rows(out.neighbor_logits);
    if (with_targets) {
      out.plain_ce = numeric::cross_entropy_rows(out.plain_probs, targets, config_.label_smoothing);
      out.neighbor_ce = numeric::cross_entropy_rows(out.neighbor_probs, targets, config_.label_smoothing);
    }
    out.sampled = std::move(sampled);
    return out;
  }

  NFormerConfig config_;
  std::size_t entity_count_;
  std::mt19937_64 rng_;
  numeric::ParameterSet<T> params_;
  Tensor<T> entity_, relation_, mask_, position_, input_ln_gain_, input_ln_bias_;
  numeric::EncoderParams<T> encoder_;
  Tensor<T> head_w_, head_b_, head_ln_gain_, head_ln_bias_;
};

}  // namespace cole::nformer
