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

// Token vocabulary: specials, words, one token per entity, then four soft
// prompt tokens per original relation. Each block is contiguous.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cole/kgdata/graph.hpp"

namespace cole::textmodel {

class TextError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TokenId = std::int32_t;

/// Lowercases ASCII letters, splits on whitespace and emits every ASCII
/// punctuation character as its own token. Bytes >= 0x80 stay inside words.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, char(c));
    } else {
      word.push_back(c < 0x80 ? char(std::tolower(c)) : char(c));
    }
  }
  flush();
  return out;
}

enum class Block { kSpecial, kWord, kEntity, kSoftPrompt };

inline const char* block_name(Block b) {
  switch (b) {
    case Block::kSpecial: return "special";
    case Block::kWord: return "word";
    case Block::kEntity: return "entity";
    case Block::kSoftPrompt: return "soft_prompt";
  }
  return "?";
}

inline constexpr const char* kSpecialTokens[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[Neighbors]"};
inline constexpr TokenId kPad = 0, kUnk = 1, kCls = 2, kSep = 3, kMask = 4, kNeighbors = 5;
inline constexpr std::size_t kSoftPromptsPerRelation = 4;

/// Words of the description-initialization prompt; always in the vocabulary.
inline const std::vector<std::string>& description_template_words() {
  static const std::vector<std::string> words{"the", "description", "of", "is", "."};
  return words;
}

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Specials, then `words` in the given order, then the entity and
  /// soft-prompt blocks.
  Vocabulary(const std::vector<std::string>& words, std::size_t entity_count, std::size_t relation_count) {
    for (const char* s : kSpecialTokens) append(s, Block::kSpecial);
    word_begin_ = size();
    for (const auto& w : words) append(w, Block::kWord);
    entity_begin_ = size();
    for (std::size_t e = 0; e < entity_count; ++e) append("[ENT]" + std::to_string(e), Block::kEntity);
    soft_begin_ = size();
    for (std::size_t r = 0; r < relation_count; ++r)
      for (std::size_t i = 1; i <= kSoftPromptsPerRelation; ++i)
        append("[SP]" + std::to_string(i) + "^" + std::to_string(r), Block::kSoftPrompt);
    entity_count_ = entity_count;
    relation_count_ = relation_count;
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t word_begin() const { return word_begin_; }
  std::size_t word_count() const { return entity_begin_ - word_begin_; }
  std::size_t entity_begin() const { return entity_begin_; }
  std::size_t entity_count() const { return entity_count_; }
  std::size_t soft_prompt_begin() const { return soft_begin_; }
  std::size_t soft_prompt_count() const { return size() - soft_begin_; }
  std::size_t relation_count() const { return relation_count_; }

  const std::string& token(TokenId id) const { return tokens_.at(std::size_t(id)); }
  Block block(TokenId id) const { return blocks_.at(std::size_t(id)); }

  TokenId id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  TokenId entity_token(kgdata::EntityId e) const {
    if (e.index() >= entity_count_) throw TextError("entity token out of range");
    return TokenId(entity_begin_ + e.index());
  }

  /// [SP]_i^r for i in 1..4 and an original relation r.
  TokenId soft_prompt(kgdata::RelationId r, std::size_t i) const {
    if (r.index() >= relation_count_ || i < 1 || i > kSoftPromptsPerRelation)
      throw TextError("soft prompt out of range (reverse relations have none)");
    return TokenId(soft_begin_ + r.index() * kSoftPromptsPerRelation + (i - 1));
  }

  /// Word ids for free text; out-of-vocabulary words map to [UNK].
  std::vector<TokenId> encode_text(const std::string& text) const {
    std::vector<TokenId> out;
    for (const auto& w : tokenize(text)) out.push_back(word_id(w));
    return out;
  }

  TokenId word_id(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end() || blocks_[std::size_t(it->second)] != Block::kWord) return kUnk;
    return it->second;
  }

  /// "#cole-vocab<TAB>1" header, then token<TAB>id<TAB>block per line.
  std::string serialize() const {
    std::ostringstream out;
    out << "#cole-vocab\t1\n";
    for (std::size_t i = 0; i < size(); ++i) out << tokens_[i] << '\t' << i << '\t' << block_name(blocks_[i]) << '\n';
    return out.str();
  }

  static Vocabulary parse(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "#cole-vocab\t1") throw TextError("vocabulary: bad header");
    std::vector<std::string> words;
    std::size_t entities = 0, soft = 0, specials = 0, expected_id = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto t1 = line.find('\t'), t2 = line.rfind('\t');
      if (t1 == std::string::npos || t1 == t2) throw TextError("vocabulary: malformed line " + line);
      const std::string token = line.substr(0, t1), block = line.substr(t2 + 1);
      if (std::stoul(line.substr(t1 + 1, t2 - t1 - 1)) != expected_id++) throw TextError("vocabulary: ids not dense");
      if (block == "special") ++specials;
      else if (block == "word") words.push_back(token);
      else if (block == "entity") ++entities;
      else if (block == "soft_prompt") ++soft;
      else throw TextError("vocabulary: unknown block " + block);
    }
    if (specials != std::size(kSpecialTokens) || soft % kSoftPromptsPerRelation)
      throw TextError("vocabulary: inconsistent block sizes");
    Vocabulary v(words, entities, soft / kSoftPromptsPerRelation);
    if (v.serialize() != text) throw TextError("vocabulary: content does not round-trip");
    return v;
  }

 private:
  void append(const std::string& token, Block block) {
    if (index_.count(token)) {
      if (block == Block::kWord) return;
      throw TextError("vocabulary: duplicate token " + token);
    }
    index_.emplace(token, TokenId(tokens_.size()));
    tokens_.push_back(token);
    blocks_.push_back(block);
  }

  std::vector<std::string> tokens_;
  std::vector<Block> blocks_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t word_begin_ = 0, entity_begin_ = 0, soft_begin_ = 0;
  std::size_t entity_count_ = 0, relation_count_ = 0;
};

/// Word vocabulary from entity names, relation names and descriptions.
/// Words below `min_freq` fall back to [UNK]; template words are kept.
inline Vocabulary build_vocabulary(const kgdata::TextStore& text, std::size_t entity_count,
                                   std::size_t relation_count, std::size_t min_freq = 1) {
  std::map<std::string, std::size_t> freq;
  std::size_t total = 0;
  auto count = [&](const std::string& s) {
    for (auto& w : tokenize(s)) {
      ++freq[w];
      ++total;
    }
  };
  for (const auto& s : text.entity_names) count(s);
  for (const auto& s : text.relation_names) count(s);
  for (const auto& s : text.entity_descriptions) count(s);
  if (total == 0) throw TextError("vocabulary: empty text corpus");
  std::vector<std::string> words;
  for (const auto& [w, n] : freq)
    if (n >= min_freq) words.push_back(w);
  for (const auto& w : description_template_words())
    if (!std::binary_search(words.begin(), words.end(), w)) words.insert(std::lower_bound(words.begin(), words.end(), w), w);
  return Vocabulary(words, entity_count, relation_count);
}

}  // namespace cole::textmodel
