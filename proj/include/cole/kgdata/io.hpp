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

// Dataset directory layout:
//   train.txt valid.txt test.txt     head<TAB>relation<TAB>tail
//   entity2text.txt                  symbol<TAB>name
//   relation2text.txt                symbol<TAB>name
//   entity2textlong.txt (optional)   symbol<TAB>description

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cole/common/binary_io.hpp"
#include "cole/common/files.hpp"
#include "cole/kgdata/graph.hpp"

namespace cole::kgdata {

namespace fs = std::filesystem;

inline constexpr const char* kSplitFiles[] = {"train.txt", "valid.txt", "test.txt"};
inline constexpr const char* kEntityNamesFile = "entity2text.txt";
inline constexpr const char* kRelationNamesFile = "relation2text.txt";
inline constexpr const char* kDescriptionsFile = "entity2textlong.txt";

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::ifstream open_or_throw(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path.string());
  return in;
}

}  // namespace detail

/// Reads one triplet file, interning symbols into the given tables (frozen
/// tables reject unknown symbols). Blank lines are ignored.
inline std::vector<Triplet> load_triplets(std::istream& in, const std::string& source, SymbolTable& entities,
                                          SymbolTable& relations) {
  std::vector<Triplet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    if (f.size() != 3) {
      throw DataError(source + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                      std::to_string(f.size()));
    }
    try {
      const auto h = entities.intern(f[0]);
      const auto r = relations.intern(f[1]);
      const auto t = entities.intern(f[2]);
      out.push_back({EntityId{h}, RelationId{r}, EntityId{t}});
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<Triplet> load_triplets(const fs::path& path, SymbolTable& entities, SymbolTable& relations) {
  auto in = detail::open_or_throw(path);
  return load_triplets(in, path.string(), entities, relations);
}

/// symbol<TAB>text lines into a table-indexed vector; unknown symbols are skipped.
inline std::vector<std::string> load_symbol_text(const fs::path& path, const SymbolTable& table,
                                                 std::size_t* found = nullptr) {
  auto in = detail::open_or_throw(path);
  std::vector<std::string> out(table.size());
  std::vector<bool> seen(table.size(), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected symbol<TAB>text");
    }
    if (auto id = table.find(line.substr(0, tab))) {
      out[*id] = line.substr(tab + 1);
      seen[*id] = true;
    }
  }
  if (found) *found = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true));
  return out;
}

struct Dataset {
  KnowledgeGraph graph;
  TextStore text;
  std::size_t missing_entity_names = 0;
  std::size_t missing_relation_names = 0;
  std::size_t empty_descriptions = 0;
};

/// Loads the three splits and the text tables. Entities first seen in
/// valid/test are kept. The returned graph holds original relations only.
inline Dataset load_dataset(const fs::path& dir) {
  SymbolTable entities, relations;
  std::vector<Triplet> splits[3];
  for (int s = 0; s < 3; ++s) splits[s] = load_triplets(dir / kSplitFiles[s], entities, relations);
  entities.freeze();
  relations.freeze();

  Dataset ds;
  std::size_t found = 0;
  ds.text.entity_names = load_symbol_text(dir / kEntityNamesFile, entities, &found);
  ds.missing_entity_names = entities.size() - found;
  ds.text.relation_names = load_symbol_text(dir / kRelationNamesFile, relations, &found);
  ds.missing_relation_names = relations.size() - found;
  for (std::size_t i = 0; i < entities.size(); ++i)
    if (ds.text.entity_names[i].empty()) ds.text.entity_names[i] = entities.name(i);
  for (std::size_t i = 0; i < relations.size(); ++i)
    if (ds.text.relation_names[i].empty()) ds.text.relation_names[i] = relations.name(i);

  if (fs::exists(dir / kDescriptionsFile)) {
    ds.text.entity_descriptions = load_symbol_text(dir / kDescriptionsFile, entities);
  } else {
    ds.text.entity_descriptions.assign(entities.size(), "");
  }
  ds.empty_descriptions = static_cast<std::size_t>(
      std::count(ds.text.entity_descriptions.begin(), ds.text.entity_descriptions.end(), std::string{}));

  ds.graph = KnowledgeGraph(std::move(entities), std::move(relations), std::move(splits[0]), std::move(splits[1]),
                            std::move(splits[2]));
  return ds;
}

/// Hash over the bytes of every dataset file that exists, keyed by file name.
inline std::string dataset_source_hash(const fs::path& dir) {
  Sha256 h;
  for (const char* name : {kSplitFiles[0], kSplitFiles[1], kSplitFiles[2], kEntityNamesFile, kRelationNamesFile,
                           kDescriptionsFile}) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) continue;
    h.update(std::string(name) + "\n");
    h.update(read_file_bytes(p));
  }
  return h.hex();
}

// ---------------------------------------------------------------------------
// Graph cache: "COLEKGC1" | u32 version | source hash | tables | splits | text
// | SHA-256 of the preceding bytes.

inline constexpr char kCacheMagic[8] = {'C', 'O', 'L', 'E', 'K', 'G', 'C', '1'};
inline constexpr std::uint32_t kCacheVersion = 1;

inline std::vector<std::uint8_t> encode_cache(const Dataset& ds, const std::string& source_hash) {
  ByteWriter w;
  w.put_raw({reinterpret_cast<const std::uint8_t*>(kCacheMagic), sizeof(kCacheMagic)});
  w.put<std::uint32_t>(kCacheVersion);
  w.put_string(source_hash);
  auto put_strings = [&](const std::vector<std::string>& v) {
    w.put<std::uint64_t>(v.size());
    for (const auto& s : v) w.put_string(s);
  };
  put_strings(ds.graph.entities().names());
  put_strings(ds.graph.relation_symbols().names());
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    const auto& ts = ds.graph.split(s);
    std::vector<std::int32_t> flat;
    flat.reserve(3 * ts.size());
    for (const Triplet& t : ts) {
      flat.push_back(t.head.value);
      flat.push_back(t.relation.value);
      flat.push_back(t.tail.value);
    }
    w.put_array<std::int32_t>(flat);
  }
  put_strings(ds.text.entity_names);
  put_strings(ds.text.relation_names);
  put_strings(ds.text.entity_descriptions);
  w.put<std::uint64_t>(ds.missing_entity_names);
  w.put<std::uint64_t>(ds.missing_relation_names);
  w.put<std::uint64_t>(ds.empty_descriptions);
  const std::string digest = sha256_hex(w.bytes());
  w.put_raw({reinterpret_cast<const std::uint8_t*>(digest.data()), digest.size()});
  return std::move(w.bytes());
}

struct CacheContents {
  Dataset dataset;
  std::string source_hash;
};

inline CacheContents decode_cache(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kDigest = 64;
  if (bytes.size() < sizeof(kCacheMagic) + kDigest) throw DataError("graph cache: file too short");
  const auto body = bytes.first(bytes.size() - kDigest);
  const std::string stored(reinterpret_cast<const char*>(bytes.data() + body.size()), kDigest);
  if (sha256_hex(body) != stored) throw DataError("graph cache: hash mismatch (file modified or corrupt)");
  try {
    ByteReader r(body);
    auto magic = r.get_raw(sizeof(kCacheMagic));
    if (!std::equal(magic.begin(), magic.end(), kCacheMagic)) throw DataError("graph cache: bad magic");
    if (r.get<std::uint32_t>() != kCacheVersion) throw DataError("graph cache: unsupported version");
    CacheContents out;
    out.source_hash = r.get_string();
    auto get_strings = [&] {
      std::vector<std::string> v(r.get<std::uint64_t>());
      for (auto& s : v) s = r.get_string();
      return v;
    };
    SymbolTable entities, relations;
    for (const auto& s : get_strings()) entities.intern(s);
    for (const auto& s : get_strings()) relations.intern(s);
    entities.freeze();
    relations.freeze();
    std::vector<Triplet> splits[3];
    for (auto& split : splits) {
      const auto flat = r.get_array<std::int32_t>();
      if (flat.size() % 3) throw DataError("graph cache: malformed split");
      for (std::size_t i = 0; i < flat.size(); i += 3)
        split.push_back({EntityId{flat[i]}, RelationId{flat[i + 1]}, EntityId{flat[i + 2]}});
    }
    Dataset& ds = out.dataset;
    ds.text.entity_names = get_strings();
    ds.text.relation_names = get_strings();
    ds.text.entity_descriptions = get_strings();
    ds.missing_entity_names = r.get<std::uint64_t>();
    ds.missing_relation_names = r.get<std::uint64_t>();
    ds.empty_descriptions = r.get<std::uint64_t>();
    if (!r.done()) throw DataError("graph cache: trailing bytes");
    ds.graph = KnowledgeGraph(std::move(entities), std::move(relations), std::move(splits[0]), std::move(splits[1]),
                              std::move(splits[2]));
    return out;
  } catch (const FormatError& e) {
    throw DataError(std::string("graph cache: ") + e.what());
  }
}

}  // namespace cole::kgdata
