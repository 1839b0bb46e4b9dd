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

// Checkpoint layout (little endian):
//   "COLECKPT" | u32 version | u8 scalar width | kind | meta pairs
//   | params: (name, rank, extents, values)* | optional optimizer state
//   | 64-char SHA-256 of everything before it

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cole/common/binary_io.hpp"
#include "cole/common/files.hpp"
#include "cole/numeric/optim.hpp"

namespace cole::numeric {

inline constexpr char kCheckpointMagic[8] = {'C', 'O', 'L', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  struct Array {
    std::string name;
    Shape shape;
    std::vector<T> values;
  };
  std::string kind;
  std::map<std::string, std::string> meta;
  std::vector<Array> params;
  std::optional<OptimizerState<T>> optimizer;
};

template <typename T>
Checkpoint<T> make_checkpoint(std::string kind, std::map<std::string, std::string> meta,
                              const ParameterSet<T>& params, const AdamW<T>* optimizer) {
  Checkpoint<T> ck;
  ck.kind = std::move(kind);
  ck.meta = std::move(meta);
  for (const auto& e : params.entries()) {
    ck.params.push_back({e.name, e.tensor.shape(), {e.tensor.values().begin(), e.tensor.values().end()}});
  }
  if (optimizer) ck.optimizer = optimizer->state();
  return ck;
}

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint<T>& ck) {
  ByteWriter w;
  w.put_raw({reinterpret_cast<const std::uint8_t*>(kCheckpointMagic), sizeof(kCheckpointMagic)});
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint8_t>(sizeof(T));
  w.put_string(ck.kind);
  w.put<std::uint64_t>(ck.meta.size());
  for (const auto& [k, v] : ck.meta) {
    w.put_string(k);
    w.put_string(v);
  }
  w.put<std::uint64_t>(ck.params.size());
  for (const auto& a : ck.params) {
    w.put_string(a.name);
    w.put_array<std::uint64_t>(std::vector<std::uint64_t>(a.shape.begin(), a.shape.end()));
    w.put_array<T>(a.values);
  }
  w.put<std::uint8_t>(ck.optimizer ? 1 : 0);
  if (ck.optimizer) {
    const auto& s = *ck.optimizer;
    w.put<std::uint64_t>(s.step);
    w.put<double>(s.config.beta1);
    w.put<double>(s.config.beta2);
    w.put<double>(s.config.eps);
    w.put<double>(s.config.weight_decay);
    w.put<double>(s.schedule.base_lr);
    w.put<std::uint64_t>(s.schedule.warmup_steps);
    w.put<std::uint64_t>(s.schedule.total_steps);
    w.put<std::uint64_t>(s.first_moment.size());
    for (std::size_t i = 0; i < s.first_moment.size(); ++i) {
      w.put_array<T>(s.first_moment[i]);
      w.put_array<T>(s.second_moment[i]);
    }
  }
  const std::string digest = sha256_hex(w.bytes());
  w.put_raw({reinterpret_cast<const std::uint8_t*>(digest.data()), digest.size()});
  return std::move(w.bytes());
}

template <typename T>
Checkpoint<T> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kDigest = 64;
  if (bytes.size() < sizeof(kCheckpointMagic) + kDigest) throw FormatError("checkpoint: file too short");
  const auto body = bytes.first(bytes.size() - kDigest);
  const std::string stored(reinterpret_cast<const char*>(bytes.data() + body.size()), kDigest);
  if (sha256_hex(body) != stored) throw FormatError("checkpoint: content hash mismatch");

  ByteReader r(body);
  auto magic = r.get_raw(sizeof(kCheckpointMagic));
  if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic)) throw FormatError("checkpoint: bad magic");
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(v));
  }
  if (const auto width = r.get<std::uint8_t>(); width != sizeof(T)) {
    throw FormatError("checkpoint: stored with " + std::to_string(8 * width) + "-bit values, expected " +
                      std::to_string(8 * sizeof(T)));
  }
  Checkpoint<T> ck;
  ck.kind = r.get_string();
  for (auto n = r.get<std::uint64_t>(); n > 0; --n) {
    std::string k = r.get_string();
    ck.meta[k] = r.get_string();
  }
  for (auto n = r.get<std::uint64_t>(); n > 0; --n) {
    typename Checkpoint<T>::Array a;
    a.name = r.get_string();
    const auto extents = r.get_array<std::uint64_t>();
    a.shape.assign(extents.begin(), extents.end());
    a.values = r.get_array<T>();
    if (element_count(a.shape) != a.values.size()) throw FormatError("checkpoint: shape/value mismatch for " + a.name);
    ck.params.push_back(std::move(a));
  }
  if (r.get<std::uint8_t>()) {
    OptimizerState<T> s;
    s.step = r.get<std::uint64_t>();
    s.config.beta1 = r.get<double>();
    s.config.beta2 = r.get<double>();
    s.config.eps = r.get<double>();
    s.config.weight_decay = r.get<double>();
    s.schedule.base_lr = r.get<double>();
    s.schedule.warmup_steps = r.get<std::uint64_t>();
    s.schedule.total_steps = r.get<std::uint64_t>();
    for (auto n = r.get<std::uint64_t>(); n > 0; --n) {
      s.first_moment.push_back(r.get_array<T>());
      s.second_moment.push_back(r.get_array<T>());
    }
    ck.optimizer = std::move(s);
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ck) {
  write_file_bytes(path, encode_checkpoint(ck));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<T>(read_file_bytes(path));
}

/// Copies stored values into `params`; every name and shape must match.
template <typename T>
void restore_parameters(const Checkpoint<T>& ck, ParameterSet<T>& params) {
  auto& entries = params.entries();
  if (entries.size() != ck.params.size()) {
    throw FormatError("incompatible checkpoint: " + std::to_string(ck.params.size()) + " parameters, model has " +
                      std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& a = ck.params[i];
    if (a.name != entries[i].name || a.shape != entries[i].tensor.shape()) {
      throw FormatError("incompatible checkpoint: parameter " + a.name + shape_string(a.shape) + " vs " +
                        entries[i].name + shape_string(entries[i].tensor.shape()));
    }
    auto dst = entries[i].tensor.mutable_values();
    std::copy(a.values.begin(), a.values.end(), dst.begin());
  }
}

}  // namespace cole::numeric
