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

// Prompt templates. With N_x the seen entity's name, N_r the relation name,
// D_x the seen entity's description and SPi the i-th soft prompt of r:
//
//   triplet,    tail missing: [CLS] N_h [SEP] N_r [SEP] [MASK] [SEP] D_h [SEP]
//   triplet,    head missing: [CLS] [MASK] [SEP] N_r [SEP] N_t [SEP] D_t [SEP]
//   relational, tail missing: [CLS] SP1 N_h SP2 N_r SP3 [MASK] SP4 D_h [SEP]
//   relational, head missing: [CLS] SP1 [MASK] SP2 N_r SP3 N_t SP4 D_t [SEP]
//   neighbor:   relational with a [Neighbors] vector slot right after the
//               seen entity's name.

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "cole/kgdata/graph.hpp"
#include "cole/textmodel/vocabulary.hpp"

namespace cole::textmodel {

using kgdata::EntityId;
using kgdata::RelationId;
using kgdata::Side;

enum class PromptKind { kTriplet, kRelational, kNeighbor };

inline constexpr std::size_t kNoSlot = std::numeric_limits<std::size_t>::max();

struct Prompt {
  std::vector<TokenId> tokens;
  std::size_t mask_position = 0;
  std::size_t neighbor_slot = kNoSlot;  // index of the [Neighbors] token, if any

  bool has_slot() const { return neighbor_slot != kNoSlot; }
};

/// Tokenized names and descriptions, built once per dataset.
class PromptBuilder {
 public:
  PromptBuilder(const Vocabulary& vocab, const kgdata::TextStore& text, std::size_t max_len)
      : vocab_(&vocab), max_len_(max_len) {
    for (const auto& s : text.entity_names) entity_names_.push_back(vocab.encode_text(s));
    for (const auto& s : text.relation_names) relation_names_.push_back(vocab.encode_text(s));
    for (const auto& s : text.entity_descriptions) descriptions_.push_back(vocab.encode_text(s));
  }

  const Vocabulary& vocabulary() const { return *vocab_; }
  std::size_t max_len() const { return max_len_; }
  std::size_t entity_count() const { return entity_names_.size(); }

  /// `seen` is the head for tail-missing prompts and the tail for head-missing
  /// ones; `missing` names the slot holding [MASK].
  Prompt make(PromptKind kind, Side missing, EntityId seen, RelationId relation,
              bool with_description = true) const {
    if (relation.index() >= relation_names_.size()) throw TextError("prompt: reverse or unknown relation");
    const auto& name = entity_names_.at(seen.index());
    const auto& rel = relation_names_[relation.index()];
    const std::vector<TokenId> none;
    const auto& desc = with_description ? descriptions_.at(seen.index()) : none;

    std::vector<TokenId> sep(4, kSep);
    if (kind != PromptKind::kTriplet)
      for (std::size_t i = 0; i < 4; ++i) sep[i] = vocab_->soft_prompt(relation, i + 1);
    const bool slot = kind == PromptKind::kNeighbor;

    Prompt p;
    auto put = [&](TokenId t) { p.tokens.push_back(t); };
    auto put_all = [&](const std::vector<TokenId>& ts) { p.tokens.insert(p.tokens.end(), ts.begin(), ts.end()); };
    auto put_mask = [&] {
      p.mask_position = p.tokens.size();
      put(kMask);
    };
    auto put_slot = [&] {
      if (!slot) return;
      p.neighbor_slot = p.tokens.size();
      put(kNeighbors);
    };
    // [CLS], [MASK], the separators and the closing [SEP] around both names.
    const std::size_t fixed = 2 + name.size() + rel.size() + (slot ? 1 : 0) + (kind == PromptKind::kTriplet ? 4 : 5);
    if (fixed > max_len_)
      throw TextError("prompt: template needs " + std::to_string(fixed) + " tokens, max length is " +
                      std::to_string(max_len_));
    const std::size_t desc_len = std::min(desc.size(), max_len_ - fixed);

    put(kCls);
    if (kind != PromptKind::kTriplet) put(sep[0]);
    if (missing == Side::kTail) {
      put_all(name);
      put_slot();
      put(kind == PromptKind::kTriplet ? sep[0] : sep[1]);
      put_all(rel);
      put(kind == PromptKind::kTriplet ? sep[1] : sep[2]);
      put_mask();
    } else {
      put_mask();
      put(kind == PromptKind::kTriplet ? sep[0] : sep[1]);
      put_all(rel);
      put(kind == PromptKind::kTriplet ? sep[1] : sep[2]);
      put_all(name);
      put_slot();
    }
    put(kind == PromptKind::kTriplet ? sep[2] : sep[3]);
    p.tokens.insert(p.tokens.end(), desc.begin(), desc.begin() + std::ptrdiff_t(desc_len));
    put(kSep);
    return p;
  }

  /// "[CLS] the description of [MASK] is D_e . [SEP]"
  Prompt description_prompt(EntityId e) const {
    const auto& words = description_template_words();
    Prompt p;
    p.tokens.push_back(kCls);
    for (std::size_t i = 0; i < 3; ++i) p.tokens.push_back(vocab_->word_id(words[i]));
    p.mask_position = p.tokens.size();
    p.tokens.push_back(kMask);
    p.tokens.push_back(vocab_->word_id(words[3]));
    const std::size_t fixed = p.tokens.size() + 2;
    const auto& desc = descriptions_.at(e.index());
    const std::size_t desc_len = max_len_ > fixed ? std::min(desc.size(), max_len_ - fixed) : 0;
    p.tokens.insert(p.tokens.end(), desc.begin(), desc.begin() + std::ptrdiff_t(desc_len));
    p.tokens.push_back(vocab_->word_id(words[4]));
    p.tokens.push_back(kSep);
    return p;
  }

  /// "[CLS] name [SEP] description [SEP]", truncated to the length budget;
  /// the masked-word warm-up corpus.
  std::vector<TokenId> corpus_sequence(EntityId e) const {
    std::vector<TokenId> seq{kCls};
    const auto& name = entity_names_.at(e.index());
    const auto& desc = descriptions_.at(e.index());
    seq.insert(seq.end(), name.begin(), name.end());
    seq.push_back(kSep);
    seq.insert(seq.end(), desc.begin(), desc.end());
    if (seq.size() + 1 > max_len_) seq.resize(max_len_ - 1);
    seq.push_back(kSep);
    return seq;
  }

  bool description_empty(EntityId e) const { return descriptions_.at(e.index()).empty(); }

 private:
  const Vocabulary* vocab_;
  std::size_t max_len_;
  std::vector<std::vector<TokenId>> entity_names_, relation_names_, descriptions_;
};

/// Space-joined token strings; the neighbor slot renders as [Neighbors].
inline std::string detokenize(const Prompt& p, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < p.tokens.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(p.tokens[i]);
  }
  return out;
}

}  // namespace cole::textmodel
