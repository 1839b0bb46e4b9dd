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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cole/codistill/trainer.hpp"
#include "cole/common/files.hpp"

namespace cole::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class KeyType { kString, kInt, kReal, kBool, kList };

struct KeySpec {
  const char* name;
  KeyType type;
  const char* desk;  // default under the desk profile
};

// clang-format off
inline const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"profile", KeyType::kString, "desk"},
      {"seed", KeyType::kInt, ""},
      {"data_dir", KeyType::kString, ""},
      {"nformer.dim", KeyType::kInt, "64"},
      {"nformer.layers", KeyType::kInt, "2"},
      {"nformer.heads", KeyType::kInt, "2"},
      {"nformer.ffn_dim", KeyType::kInt, "0"},
      {"nformer.dropout", KeyType::kReal, "0.1"},
      {"nformer.neighbors", KeyType::kInt, "4"},
      {"nformer.normalize_neighbors", KeyType::kBool, "false"},
      {"nformer.label_smoothing", KeyType::kReal, "0"},
      {"nformer.lr", KeyType::kReal, "2e-3"},
      {"nformer.batch_size", KeyType::kInt, "0"},  // 0: train.batch_size
      {"text.dim", KeyType::kInt, "64"},
      {"text.layers", KeyType::kInt, "2"},
      {"text.heads", KeyType::kInt, "2"},
      {"text.ffn_dim", KeyType::kInt, "0"},
      {"text.dropout", KeyType::kReal, "0.1"},
      {"text.max_len", KeyType::kInt, "128"},
      {"text.neighbors_in", KeyType::kInt, "2"},
      {"text.neighbors_out", KeyType::kInt, "2"},
      {"text.neighbor_desc", KeyType::kBool, "false"},
      {"text.label_smoothing", KeyType::kReal, "0"},
      {"text.warmup_steps", KeyType::kInt, "200"},
      {"text.warmup_batch", KeyType::kInt, "32"},
      {"text.warmup_lr", KeyType::kReal, "1e-3"},
      {"text.mask_prob", KeyType::kReal, "0.15"},
      {"text.lr", KeyType::kReal, "2e-3"},
      {"text.batch_size", KeyType::kInt, "0"},  // 0: train.batch_size
      {"train.epochs", KeyType::kInt, "200"},
      {"train.batch_size", KeyType::kInt, "64"},
      {"train.patience", KeyType::kInt, "10"},
      {"train.weight_decay", KeyType::kReal, "0.01"},
      {"train.warmup_fraction", KeyType::kReal, "0.01"},
      {"distill.alpha", KeyType::kReal, "0.5"},
      {"distill.beta", KeyType::kReal, "0.8"},
      {"distill.fraction", KeyType::kReal, "0.5"},
      {"distill.temperature", KeyType::kReal, "1"},
      {"distill.full_target_prob", KeyType::kBool, "false"},
      {"distill.epochs", KeyType::kInt, "200"},
      {"distill.patience", KeyType::kInt, "10"},
      {"distill.structure_lr", KeyType::kReal, "5e-4"},
      {"distill.text_lr", KeyType::kReal, "5e-4"},
      {"ensemble.weight", KeyType::kReal, "0.5"},
      {"eval.batch_size", KeyType::kInt, "64"},
      {"eval.degree_edges", KeyType::kList, "1,5,10,20,50,100"},
  };
  return specs;
}
// clang-format on

/// Preset values layered over the desk defaults.
inline std::map<std::string, std::string> profile_preset(const std::string& profile) {
  if (profile == "desk") return {};
  if (profile == "fb15k237")
    return {{"nformer.dim", "256"}, {"nformer.layers", "8"}, {"nformer.heads", "2"}, {"text.dim", "256"},
            {"text.layers", "8"},   {"text.heads", "2"},     {"distill.alpha", "0.5"}, {"distill.beta", "0.8"}};
  if (profile == "wn18rr")
    return {{"nformer.dim", "256"}, {"nformer.layers", "12"}, {"nformer.heads", "4"}, {"text.dim", "256"},
            {"text.layers", "12"},  {"text.heads", "4"},      {"distill.alpha", "0.5"}, {"distill.beta", "0.7"}};
  throw ConfigError("unknown profile '" + profile + "' (expected desk, fb15k237 or wn18rr)");
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// Parses `key = value` lines; `#` starts a comment. Later lines win.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                          const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(n) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

/// `key=value` from a --set flag.
inline std::pair<std::string, std::string> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
  return {trim(s.substr(0, eq)), trim(s.substr(eq + 1))};
}

/// Fully resolved run configuration. Values are kept as text and parsed on
/// access; every key is checked against its type when the config is built.
class RunConfig {
 public:
  /// Desk defaults, then the chosen profile, then `overrides` in order. The
  /// profile comes from the last `profile` override, if any.
  static RunConfig resolve(const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig c;
    for (const auto& k : key_specs()) c.values_[k.name] = k.desk;
    std::string profile = "desk";
    for (const auto& [k, v] : overrides)
      if (k == "profile") profile = v;
    for (const auto& [k, v] : profile_preset(profile)) c.values_[k] = v;
    for (const auto& [k, v] : overrides) {
      if (!c.values_.count(k)) throw ConfigError("unknown config key '" + k + "'");
      c.values_[k] = v;
    }
    c.values_["profile"] = profile;
    c.check_types();
    return c;
  }

  const std::string& text(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  bool has(const std::string& key) const { return !text(key).empty(); }

  std::int64_t integer(const std::string& key) const { return parse_int(key, text(key)); }
  std::size_t count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) throw ConfigError(key + " must be non-negative");
    return std::size_t(v);
  }
  double real(const std::string& key) const { return parse_real(key, text(key)); }
  bool flag(const std::string& key) const { return parse_bool(key, text(key)); }
  std::vector<std::size_t> list(const std::string& key) const {
    std::vector<std::size_t> out;
    std::istringstream in(text(key));
    std::string item;
    while (std::getline(in, item, ',')) {
      const auto v = parse_int(key, trim(item));
      if (v < 0) throw ConfigError(key + ": entries must be non-negative");
      out.push_back(std::size_t(v));
    }
    return out;
  }

  /// Seed for training commands; absent seeds are a config error.
  std::uint64_t seed() const {
    if (!has("seed")) throw ConfigError("seed is mandatory for training (pass --seed or set seed = N)");
    return std::uint64_t(integer("seed"));
  }

  /// `key = value` lines in key order.
  std::string echo() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
    check_types();
  }

  nformer::NFormerConfig nformer() const {
    nformer::NFormerConfig c;
    c.shape = {count("nformer.dim"), count("nformer.layers"), count("nformer.heads"), count("nformer.ffn_dim")};
    c.dropout = real("nformer.dropout");
    c.neighbors = count("nformer.neighbors");
    c.normalize_neighbors = flag("nformer.normalize_neighbors");
    c.label_smoothing = real("nformer.label_smoothing");
    return c;
  }

  textmodel::TextConfig text_model() const {
    textmodel::TextConfig c;
    c.shape = {count("text.dim"), count("text.layers"), count("text.heads"), count("text.ffn_dim")};
    c.max_len = count("text.max_len");
    c.dropout = real("text.dropout");
    c.neighbors_in = count("text.neighbors_in");
    c.neighbors_out = count("text.neighbors_out");
    c.neighbor_desc = flag("text.neighbor_desc");
    c.label_smoothing = real("text.label_smoothing");
    c.warmup_steps = count("text.warmup_steps");
    c.warmup_batch = count("text.warmup_batch");
    c.warmup_lr = real("text.warmup_lr");
    c.mask_prob = real("text.mask_prob");
    return c;
  }

  codistill::FitOptions fit(const std::string& model) const {
    codistill::FitOptions o;
    o.epochs = count("train.epochs");
    const std::size_t own_batch = count(model + ".batch_size");
    o.batch_size = own_batch ? own_batch : count("train.batch_size");
    o.patience = count("train.patience");
    o.lr = real(model + ".lr");
    o.weight_decay = real("train.weight_decay");
    o.warmup_fraction = real("train.warmup_fraction");
    o.seed = seed();
    return o;
  }

  codistill::DistillConfig distill() const {
    codistill::DistillConfig d;
    d.alpha = real("distill.alpha");
    d.beta = real("distill.beta");
    d.fraction = real("distill.fraction");
    d.temperature = real("distill.temperature");
    d.full_target_prob = flag("distill.full_target_prob");
    try {
      d.validate();
    } catch (const codistill::DistillError& e) {
      throw ConfigError(std::string("distill: ") + e.what());
    }
    return d;
  }

  /// Both models score the same batches, so only train.batch_size applies.
  codistill::JointOptions joint() const {
    codistill::JointOptions o;
    o.epochs = count("distill.epochs");
    o.batch_size = count("train.batch_size");
    o.patience = count("distill.patience");
    o.structure_lr = real("distill.structure_lr");
    o.text_lr = real("distill.text_lr");
    o.weight_decay = real("train.weight_decay");
    o.warmup_fraction = real("train.warmup_fraction");
    o.seed = seed();
    o.distill = distill();
    return o;
  }

 private:
  static std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
  }
  static double parse_real(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double out = std::stod(v, &used);
      if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  static bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
  }

  void check_types() const {
    for (const auto& k : key_specs()) {
      const std::string& v = values_.at(k.name);
      if (v.empty() && k.type != KeyType::kString) {
        if (std::string(k.name) == "seed") continue;
        throw ConfigError(std::string(k.name) + ": value required");
      }
      switch (k.type) {
        case KeyType::kInt: parse_int(k.name, v); break;
        case KeyType::kReal: parse_real(k.name, v); break;
        case KeyType::kBool: parse_bool(k.name, v); break;
        case KeyType::kList: list(k.name); break;
        case KeyType::kString: break;
      }
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace cole::cli
