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

// Text model: a small masked-sequence encoder trained from scratch. Entities
// are predicted at the [MASK] position by an inner product with the entity
// block of the (tied) token embedding matrix.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cole/common/random.hpp"
#include "cole/kgdata/graph.hpp"
#include "cole/numeric/encoder.hpp"
#include "cole/numeric/functional.hpp"
#include "cole/numeric/optim.hpp"
#include "cole/textmodel/prompt.hpp"

namespace cole::textmodel {

using kgdata::KnowledgeGraph;
using kgdata::Neighbor;
using kgdata::Query;
using numeric::Tensor;

struct TextConfig {
  numeric::EncoderShape shape{64, 2, 2, 0};
  std::size_t max_len = 128;
  double dropout = 0.1;
  std::size_t neighbors_in = 2;
  std::size_t neighbors_out = 2;
  bool neighbor_desc = false;  // descriptions inside the neighbor prompts
  double label_smoothing = 0.0;
  std::size_t warmup_steps = 200;  // masked-word phase
  std::size_t warmup_batch = 32;
  double warmup_lr = 1e-3;
  double mask_prob = 0.15;
};

/// In-neighbors (h', r') and out-neighbors (r', t') over original relations.
struct PromptNeighbors {
  std::vector<Neighbor> in, out;

  bool empty() const { return in.empty() && out.empty(); }
};

template <typename T>
struct TextOutputs {
  Tensor<T> logits, probs;  // [n, |E|]
  Tensor<T> ce;             // [n, 1]; defined when targets are known
  std::vector<PromptNeighbors> sampled;
};

/// Original-relation prefix of a neighbor list (lists are sorted by relation).
inline std::span<const Neighbor> original_only(std::span<const Neighbor> all, std::size_t relation_count) {
  std::size_t n = 0;
  while (n < all.size() && all[n].relation.index() < relation_count) ++n;
  return all.first(n);
}

template <typename T>
class TextModel {
 public:
  TextModel(const TextConfig& config, const PromptBuilder& prompts, std::uint64_t seed)
      : config_(config), prompts_(&prompts), rng_(derive_seed({seed, 0x74657874ULL})) {
    if (prompts.max_len() != config.max_len) throw TextError("text model: prompt builder max length differs");
    std::mt19937_64 init(derive_seed({seed, 0x696e6974ULL, 2}));
    const std::size_t d = config.shape.dim;
    const Vocabulary& vocab = prompts.vocabulary();
    token_ = params_.add("text.token", {vocab.size(), d}, numeric::Init::kTruncatedNormal, init);
    position_ = params_.add("text.position", {config.max_len, d}, numeric::Init::kTruncatedNormal, init);
    encoder_ = numeric::EncoderParams<T>::create(config.shape, params_, "text.encoder", init);
    head_w_ = params_.add("text.head.w", {d, d}, numeric::Init::kTruncatedNormal, init);
    head_b_ = params_.add("text.head.b", {d}, numeric::Init::kZeros, init);
    head_ln_gain_ = params_.add("text.head.ln.gain", {d}, numeric::Init::kOnes, init);
    head_ln_bias_ = params_.add("text.head.ln.bias", {d}, numeric::Init::kZeros, init);
    for (std::size_t e = 0; e < vocab.entity_count(); ++e) entity_rows_.push_back(vocab.entity_begin() + e);
    for (std::size_t w = 0; w < vocab.word_count(); ++w) word_rows_.push_back(vocab.word_begin() + w);
  }

  const TextConfig& config() const { return config_; }
  const PromptBuilder& prompts() const { return *prompts_; }
  const Vocabulary& vocabulary() const { return prompts_->vocabulary(); }
  std::size_t entity_count() const { return entity_rows_.size(); }
  numeric::ParameterSet<T>& parameters() { return params_; }
  const numeric::ParameterSet<T>& parameters() const { return params_; }
  const numeric::EncoderParams<T>& encoder() const { return encoder_; }
  std::mt19937_64& rng() { return rng_; }

  /// Encodes packed prompts and returns the [MASK] outputs [n, d]. Rows of
  /// `slot_vectors` are added, in order, at the slots of prompts that have one.
  Tensor<T> encode_prompts(const std::vector<Prompt>& prompts, const Tensor<T>* slot_vectors,
                           const numeric::PassMode& mode = {}) const {
    std::vector<std::size_t> ids, positions, mask_rows, slot_rows;
    std::vector<numeric::Segment> segments;
    for (const Prompt& p : prompts) {
      if (p.tokens.size() > config_.max_len) throw TextError("prompt longer than max length");
      const std::size_t start = ids.size();
      segments.push_back({start, p.tokens.size()});
      for (std::size_t i = 0; i < p.tokens.size(); ++i) {
        ids.push_back(std::size_t(p.tokens[i]));
        positions.push_back(i);
      }
      mask_rows.push_back(start + p.mask_position);
      if (p.has_slot()) slot_rows.push_back(start + p.neighbor_slot);
    }
    const std::size_t total = ids.size();
    Tensor<T> x = numeric::add(numeric::gather_rows(token_, std::move(ids)),
                               numeric::gather_rows(position_, std::move(positions)));
    if (!slot_rows.empty()) {
      if (!slot_vectors || slot_vectors->rows() != slot_rows.size())
        throw TextError("text model: slot vector count does not match prompts");
      x = numeric::add(x, numeric::scatter_add_rows(*slot_vectors, std::move(slot_rows), total));
    }
    Tensor<T> h = numeric::encode_sequences(x, segments, encoder_, mode);
    return numeric::gather_rows(h, std::move(mask_rows));
  }

  Tensor<T> head(const Tensor<T>& h) const {
    return numeric::layer_norm(numeric::gelu(numeric::linear(h, head_w_, head_b_)), head_ln_gain_, head_ln_bias_);
  }

  /// Entity logits: head output against the entity rows of the embedding.
  Tensor<T> entity_logits(const Tensor<T>& mask_outputs) const {
    return numeric::matmul_nt(head(mask_outputs), numeric::gather_rows(token_, entity_rows_));
  }

  std::vector<Prompt> neighbor_prompts(const PromptNeighbors& nb) const {
    std::vector<Prompt> out;
    for (const Neighbor& n : nb.in)
      out.push_back(prompts_->make(PromptKind::kRelational, Side::kTail, n.entity, n.relation, config_.neighbor_desc));
    for (const Neighbor& n : nb.out)
      out.push_back(prompts_->make(PromptKind::kRelational, Side::kHead, n.entity, n.relation, config_.neighbor_desc));
    return out;
  }

  /// Sum of the [MASK] encodings of every neighbor prompt, [1, d].
  Tensor<T> neighbor_prompt_embedding(const PromptNeighbors& nb) const {
    const auto ps = neighbor_prompts(nb);
    if (ps.empty()) return Tensor<T>::zeros({1, config_.shape.dim});
    return numeric::scatter_add_rows(encode_prompts(ps, nullptr), std::vector<std::size_t>(ps.size(), 0), 1);
  }

  /// Prompt for a query: the neighbor prompt when neighbors exist, the
  /// relational prompt otherwise.
  Prompt query_prompt(const Query& q, bool with_neighbors) const {
    const auto kind = with_neighbors ? PromptKind::kNeighbor : PromptKind::kRelational;
    return prompts_->make(kind, q.side, seen_entity(q), q.triplet.relation);
  }

  /// Entity distribution for one prompt with an optional slot vector.
  Tensor<T> predict_masked_entity(const Prompt& prompt, const Tensor<T>* slot_vector = nullptr) const {
    return numeric::softmax_rows(entity_logits(encode_prompts({prompt}, slot_vector)));
  }

  static kgdata::EntityId seen_entity(const Query& q) {
    return q.side == Side::kTail ? q.triplet.head : q.triplet.tail;
  }

  /// Neighbors for the seen entity of `q`; the query triplet itself is never
  /// one of them.
  PromptNeighbors sample_prompt_neighbors(const KnowledgeGraph& graph, const Query& q, std::uint64_t seed) const {
    const std::size_t r_count = graph.original_relation_count();
    const auto e = seen_entity(q);
    std::optional<Neighbor> leak_in, leak_out;
    if (q.side == Side::kTail) leak_out = Neighbor{q.triplet.tail, q.triplet.relation};
    else leak_in = Neighbor{q.triplet.head, q.triplet.relation};
    PromptNeighbors nb;
    nb.in = kgdata::sample_from(original_only(graph.neighbors(e, kgdata::Direction::kIn), r_count),
                                config_.neighbors_in, seed, leak_in);
    nb.out = kgdata::sample_from(original_only(graph.neighbors(e, kgdata::Direction::kOut), r_count),
                                 config_.neighbors_out, splitmix64(seed), leak_out);
    return nb;
  }

  std::vector<PromptNeighbors> sample_for(const KnowledgeGraph& graph, std::span<const Query> queries,
                                          bool training) {
    std::vector<PromptNeighbors> out;
    out.reserve(queries.size());
    for (const Query& q : queries) out.push_back(sample_prompt_neighbors(graph, q, training ? rng_() : inference_seed(q)));
    return out;
  }

  static std::uint64_t inference_seed(const Query& q) {
    return derive_seed({0x6576616cULL, q.triplet.head.index(), q.triplet.relation.index(), q.triplet.tail.index(),
                        q.side == Side::kTail ? 1u : 0u});
  }

  TextOutputs<T> forward(std::span<const Query> queries, std::vector<PromptNeighbors> sampled, bool training,
                         bool with_targets = true) {
    numeric::PassMode mode;
    if (training) mode = {config_.dropout, &rng_};
    return forward_impl(queries, std::move(sampled), mode, with_targets);
  }

  TextOutputs<T> infer(const KnowledgeGraph& graph, std::span<const Query> queries) const {
    std::vector<PromptNeighbors> sampled;
    for (const Query& q : queries) sampled.push_back(sample_prompt_neighbors(graph, q, inference_seed(q)));
    return forward_impl(queries, std::move(sampled), {}, false);
  }

  /// Sum of CE over head and tail queries divided by the triplet count.
  static Tensor<T> text_loss(const TextOutputs<T>& out, std::size_t triplet_count) {
    return numeric::scale(numeric::sum_all(out.ce), T(1) / T(triplet_count));
  }

  // ---- masked-word warm-up ------------------------------------------------

  /// Masked-word loss on the name/description sequences of `entities`.
  /// Returns an undefined tensor when no word could be masked.
  Tensor<T> masked_word_loss(std::span<const kgdata::EntityId> entities) {
    const Vocabulary& vocab = vocabulary();
    std::vector<Prompt> seqs;
    std::vector<std::size_t> targets;
    std::bernoulli_distribution pick(config_.mask_prob);
    std::vector<std::size_t> rows;
    std::size_t offset = 0;
    for (auto e : entities) {
      auto tokens = prompts_->corpus_sequence(e);
      std::vector<std::size_t> words;
      for (std::size_t i = 0; i < tokens.size(); ++i)
        if (vocab.block(tokens[i]) == Block::kWord) words.push_back(i);
      if (words.empty()) continue;
      std::vector<std::size_t> chosen;
      for (std::size_t i : words)
        if (pick(rng_)) chosen.push_back(i);
      if (chosen.empty()) chosen.push_back(words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng_)]);
      for (std::size_t i : chosen) {
        targets.push_back(std::size_t(tokens[i]) - vocab.word_begin());
        rows.push_back(offset + i);
        tokens[i] = kMask;
      }
      offset += tokens.size();
      seqs.push_back({std::move(tokens), 0, kNoSlot});
    }
    if (seqs.empty()) return {};
    Tensor<T> h = encode_all_positions(seqs, {config_.dropout, &rng_});
    Tensor<T> logits = numeric::matmul_nt(head(numeric::gather_rows(h, rows)), numeric::gather_rows(token_, word_rows_));
    return numeric::mean_all(numeric::cross_entropy_rows(numeric::softmax_rows(logits), targets));
  }

  /// Runs the warm-up phase with its own optimizer; returns per-step losses.
  std::vector<double> run_warmup(std::size_t steps, double lr) {
    std::vector<double> losses;
    if (steps == 0) return losses;
    numeric::AdamW<T> opt(params_, {}, {lr, steps / 10, steps});
    const std::size_t n = entity_count();
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<kgdata::EntityId> batch;
      for (std::size_t i = 0; i < std::min(config_.warmup_batch, n); ++i) batch.push_back(kgdata::entity_at(pick(rng_)));
      Tensor<T> loss = masked_word_loss(batch);
      if (!loss.defined()) break;
      if (!std::isfinite(double(loss.item()))) throw numeric::DivergenceError("text warm-up: non-finite loss");
      params_.zero_grad();
      numeric::backward(loss);
      opt.step(params_);
      losses.push_back(double(loss.item()));
    }
    return losses;
  }

  /// [MASK] output of the description prompt of `e`, [1, d].
  Tensor<T> description_vector(kgdata::EntityId e) const {
    return encode_prompts({prompts_->description_prompt(e)}, nullptr);
  }

  /// Overwrites every entity row with its description vector. Returns the
  /// number of entities whose description was empty.
  std::size_t apply_description_init(std::size_t batch = 64) {
    numeric::NoGradGuard guard;
    const std::size_t n = entity_count(), d = config_.shape.dim;
    std::size_t empty = 0;
    auto rows = token_.mutable_values();
    for (std::size_t start = 0; start < n; start += batch) {
      std::vector<Prompt> ps;
      for (std::size_t e = start; e < std::min(n, start + batch); ++e) {
        ps.push_back(prompts_->description_prompt(kgdata::entity_at(e)));
        empty += prompts_->description_empty(kgdata::entity_at(e));
      }
      const Tensor<T> v = encode_prompts(ps, nullptr);
      for (std::size_t i = 0; i < ps.size(); ++i)
        std::copy_n(v.values().begin() + i * d, d, rows.begin() + entity_rows_[start + i] * d);
    }
    return empty;
  }

 private:
  Tensor<T> encode_all_positions(const std::vector<Prompt>& seqs, const numeric::PassMode& mode) const {
    std::vector<std::size_t> ids, positions;
    std::vector<numeric::Segment> segments;
    for (const Prompt& p : seqs) {
      segments.push_back({ids.size(), p.tokens.size()});
      for (std::size_t i = 0; i < p.tokens.size(); ++i) {
        ids.push_back(std::size_t(p.tokens[i]));
        positions.push_back(i);
      }
    }
    Tensor<T> x = numeric::add(numeric::gather_rows(token_, std::move(ids)),
                               numeric::gather_rows(position_, std::move(positions)));
    return numeric::encode_sequences(x, segments, encoder_, mode);
  }

  TextOutputs<T> forward_impl(std::span<const Query> queries, std::vector<PromptNeighbors> sampled,
                              const numeric::PassMode& mode, bool with_targets) const {
    const std::size_t n = queries.size();
    if (sampled.size() != n) throw TextError("text model: one neighbor set per query required");
    // Pass 1: every neighbor prompt of every query, summed per query.
    std::vector<Prompt> nb_prompts;
    std::vector<std::size_t> owners;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& p : neighbor_prompts(sampled[i])) {
        nb_prompts.push_back(std::move(p));
        owners.push_back(i);
      }
    }
    std::vector<Prompt> main;
    std::vector<std::size_t> slot_owner, targets(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool with_nb = !sampled[i].empty();
      main.push_back(query_prompt(queries[i], with_nb));
      if (with_nb) slot_owner.push_back(i);
      targets[i] = queries[i].target.index();
    }
    Tensor<T> slots;
    if (!nb_prompts.empty()) {
      Tensor<T> sums = numeric::scatter_add_rows(encode_prompts(nb_prompts, nullptr, mode), owners, n);
      slots = numeric::gather_rows(sums, slot_owner);
    }
    // Pass 2: the query prompts with the neighbor vectors injected.
    TextOutputs<T> out;
    out.logits = entity_logits(encode_prompts(main, slots.defined() ? &slots : nullptr, mode));
    out.probs = numeric::softmax_rows(out.logits);
    if (with_targets) out.ce = numeric::cross_entropy_rows(out.probs, targets, config_.label_smoothing);
    out.sampled = std::move(sampled);
    return out;
  }

  TextConfig config_;
  const PromptBuilder* prompts_;
  std::mt19937_64 rng_;
  numeric::ParameterSet<T> params_;
  Tensor<T> token_, position_;
  numeric::EncoderParams<T> encoder_;
  Tensor<T> head_w_, head_b_, head_ln_gain_, head_ln_bias_;
  std::vector<std::size_t> entity_rows_, word_rows_;
};

}  // namespace cole::textmodel
