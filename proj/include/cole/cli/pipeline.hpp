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

// The command implementations behind the cole executable. Every command
// works inside one output directory holding the graph cache, vocabulary,
// checkpoints, logs, reports and a manifest of content hashes.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "cole/cli/config.hpp"
#include "cole/codistill/trainer.hpp"
#include "cole/common/files.hpp"
#include "cole/evalrank/rank.hpp"
#include "cole/kgdata/io.hpp"
#include "cole/numeric/checkpoint.hpp"
#include "cole/textmodel/train.hpp"
#include "json.hpp"

namespace cole::cli {

namespace fs = std::filesystem;

/// Models are trained and stored in single precision.
using Real = float;

inline constexpr const char* kCacheFile = "graph.cache";
inline constexpr const char* kVocabFile = "vocab.txt";
inline constexpr const char* kManifestFile = "manifest.tsv";
inline constexpr const char* kLockFile = ".lock";

/// Exclusive claim on an output directory for the lifetime of a command.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / kLockFile) {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw ConfigError("output directory " + dir.string() + " is in use (remove " + path_.string() +
                              " if no other run is active)");
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

/// Rewrites manifest.tsv as "sha256<TAB>file" for every artifact in `dir`.
inline void write_manifest(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == kManifestFile || name == kLockFile || name.ends_with(".tmp")) continue;
    names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  std::string text;
  for (const auto& n : names) text += sha256_file(dir / n) + "\t" + n + "\n";
  write_file_text(dir / kManifestFile, text);
}

inline void write_config_echo(const fs::path& dir, const std::string& command, const RunConfig& cfg) {
  write_file_text(dir / (command + ".config.txt"), cfg.echo());
}

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

/// Appends one JSON object per epoch and flushes, so a killed run keeps its
/// history.
class JsonlLog {
 public:
  explicit JsonlLog(const fs::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot create " + path.string());
  }
  void write(const nlohmann::json& j) {
    out_ << j.dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("log write failed");
  }
  void epoch(const codistill::EpochRecord& r) {
    write({{"epoch", r.epoch},
           {"structure_loss", number_or_null(r.structure_loss)},
           {"text_loss", number_or_null(r.text_loss)},
           {"structure_valid_mrr", number_or_null(r.structure_mrr)},
           {"text_valid_mrr", number_or_null(r.text_mrr)}});
  }

 private:
  std::ofstream out_;
};

inline textmodel::Vocabulary read_vocabulary(const fs::path& dir) {
  const auto b = read_file_bytes(dir / kVocabFile);
  try {
    return textmodel::Vocabulary::parse(std::string(b.begin(), b.end()));
  } catch (const textmodel::TextError& e) {
    throw kgdata::DataError((dir / kVocabFile).string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareResult {
  bool reused = false;
  std::size_t entities = 0, relations = 0, train = 0, valid = 0, test = 0;
  std::size_t vocabulary = 0, missing_names = 0, empty_descriptions = 0;

  std::string summary() const {
    return "entities " + std::to_string(entities) + "\nrelations " + std::to_string(relations) + "\ntrain " +
           std::to_string(train) + "\nvalid " + std::to_string(valid) + "\ntest " + std::to_string(test) +
           "\nvocabulary " + std::to_string(vocabulary) + "\nmissing_names " + std::to_string(missing_names) +
           "\nempty_descriptions " + std::to_string(empty_descriptions) + "\n";
  }
};

/// Builds (or reuses, when the dataset hash matches) the graph cache and
/// vocabulary. A modified cache fails its embedded hash check.
inline PrepareResult prepare(const fs::path& data_dir, const fs::path& out) {
  RunLock lock(out);
  const std::string source = kgdata::dataset_source_hash(data_dir);
  PrepareResult r;
  kgdata::Dataset ds;
  if (fs::exists(out / kCacheFile)) {
    auto cached = kgdata::decode_cache(read_file_bytes(out / kCacheFile));
    if (cached.source_hash == source && fs::exists(out / kVocabFile)) {
      read_vocabulary(out);  // must still parse
      ds = std::move(cached.dataset);
      r.reused = true;
    }
  }
  if (!r.reused) {
    ds = kgdata::load_dataset(data_dir);
    write_file_bytes(out / kCacheFile, kgdata::encode_cache(ds, source));
    const auto vocab = textmodel::build_vocabulary(ds.text, ds.graph.entity_count(), ds.graph.original_relation_count());
    write_file_text(out / kVocabFile, vocab.serialize());
  }
  r.entities = ds.graph.entity_count();
  r.relations = ds.graph.original_relation_count();
  r.train = ds.graph.train().size();
  r.valid = ds.graph.valid().size();
  r.test = ds.graph.test().size();
  r.vocabulary = read_vocabulary(out).size();
  r.missing_names = ds.missing_entity_names + ds.missing_relation_names;
  r.empty_descriptions = ds.empty_descriptions;
  write_file_text(out / "stats.txt", r.summary());
  write_manifest(out);
  return r;
}

// ---------------------------------------------------------------------------
// Loading prepared data and checkpoints

/// Graph (with reverse relations), text and vocabulary of a prepared
/// output directory.
struct Workspace {
  fs::path dir;
  kgdata::Dataset data;
  textmodel::Vocabulary vocab;

  const kgdata::KnowledgeGraph& graph() const { return data.graph; }
};

inline std::unique_ptr<Workspace> open_workspace(const fs::path& dir) {
  if (!fs::exists(dir / kCacheFile))
    throw kgdata::DataError("no graph cache in " + dir.string() + " (run prepare first)");
  auto ws = std::make_unique<Workspace>();
  ws->dir = dir;
  ws->data = kgdata::decode_cache(read_file_bytes(dir / kCacheFile)).dataset;
  ws->data.graph.add_reverse_relations();
  ws->vocab = read_vocabulary(dir);
  if (ws->vocab.entity_count() != ws->graph().entity_count())
    throw kgdata::DataError("vocabulary does not match the graph cache");
  return ws;
}

struct StructureModel {
  std::unique_ptr<nformer::NFormer<Real>> model;
};

struct TextModelBundle {
  std::unique_ptr<textmodel::PromptBuilder> prompts;
  std::unique_ptr<textmodel::TextModel<Real>> model;
};

inline StructureModel make_structure(const Workspace& ws, const RunConfig& cfg, std::uint64_t seed) {
  StructureModel s;
  s.model = std::make_unique<nformer::NFormer<Real>>(cfg.nformer(), ws.graph().entity_count(),
                                                     ws.graph().relation_count(), seed);
  return s;
}

inline TextModelBundle make_text(const Workspace& ws, const RunConfig& cfg, std::uint64_t seed) {
  TextModelBundle t;
  const auto c = cfg.text_model();
  t.prompts = std::make_unique<textmodel::PromptBuilder>(ws.vocab, ws.data.text, c.max_len);
  t.model = std::make_unique<textmodel::TextModel<Real>>(c, *t.prompts, seed);
  return t;
}

inline void save_model(const fs::path& path, const std::string& kind, const RunConfig& cfg,
                       const numeric::ParameterSet<Real>& params, std::size_t best_epoch) {
  numeric::save_checkpoint(path, numeric::make_checkpoint<Real>(
                                     kind, {{"config", cfg.echo()}, {"best_epoch", std::to_string(best_epoch)}},
                                     params, nullptr));
}

inline numeric::Checkpoint<Real> read_checkpoint(const fs::path& path, const std::string& kind) {
  if (!fs::exists(path)) throw kgdata::DataError("missing checkpoint " + path.string());
  numeric::Checkpoint<Real> ck;
  try {
    ck = numeric::load_checkpoint<Real>(path);
  } catch (const FormatError& e) {
    throw kgdata::DataError(path.string() + ": " + e.what());
  }
  if (ck.kind != kind) throw ConfigError(path.string() + " holds a " + ck.kind + " model, expected " + kind);
  return ck;
}

/// Config stored inside a checkpoint; rebuilds the architecture it was
/// trained with.
inline RunConfig checkpoint_config(const numeric::Checkpoint<Real>& ck) {
  auto it = ck.meta.find("config");
  if (it == ck.meta.end()) throw kgdata::DataError("checkpoint lacks its config");
  return RunConfig::resolve(parse_config_text(it->second, "checkpoint config"));
}

inline void restore_into(const numeric::Checkpoint<Real>& ck, numeric::ParameterSet<Real>& params,
                         const fs::path& path) {
  try {
    numeric::restore_parameters(ck, params);
  } catch (const FormatError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// `seed` only drives neighbor sampling and dropout if training continues.
inline StructureModel load_structure(const Workspace& ws, const fs::path& path, std::uint64_t seed = 0) {
  const auto ck = read_checkpoint(path, "nformer");
  auto s = make_structure(ws, checkpoint_config(ck), seed);
  restore_into(ck, s.model->parameters(), path);
  return s;
}

inline TextModelBundle load_text(const Workspace& ws, const fs::path& path, std::uint64_t seed = 0) {
  const auto ck = read_checkpoint(path, "text");
  auto t = make_text(ws, checkpoint_config(ck), seed);
  restore_into(ck, t.model->parameters(), path);
  return t;
}

// ---------------------------------------------------------------------------
// train

struct TrainResult {
  codistill::FitResult fit;
  double initial_valid_mrr = 0;
  fs::path checkpoint;
};

/// Standalone training of "nformer" or "text"; writes <model>.ckpt and
/// train-<model>.log.jsonl. Zero epochs stores the initialization.
inline TrainResult train(const RunConfig& cfg, const fs::path& out, const std::string& which,
                         std::ostream& progress) {
  if (which != "nformer" && which != "text") throw ConfigError("unknown model '" + which + "' (nformer or text)");
  const std::uint64_t seed = cfg.seed();
  RunLock lock(out);
  const auto ws = open_workspace(out);
  const auto& graph = ws->graph();
  const auto options = cfg.fit(which);
  write_config_echo(out, "train-" + which, cfg);
  JsonlLog log(out / ("train-" + which + ".log.jsonl"));
  auto logger = [&](const codistill::EpochRecord& r) {
    log.epoch(r);
    const double loss = which == "nformer" ? r.structure_loss : r.text_loss;
    const double mrr = which == "nformer" ? r.structure_mrr : r.text_mrr;
    progress << which << " epoch " << r.epoch << " loss " << loss << " valid_mrr " << mrr << '\n';
  };

  TrainResult result;
  result.checkpoint = out / (which + ".ckpt");
  codistill::EpochRecord initial;
  if (which == "nformer") {
    auto s = make_structure(*ws, cfg, seed);
    result.initial_valid_mrr = codistill::split_mrr<Real>(graph, graph.valid(), codistill::structure_scorer(*s.model, graph));
    initial.structure_mrr = result.initial_valid_mrr;
    logger(initial);
    if (options.epochs) result.fit = codistill::fit_structure(*s.model, graph, options, logger);
    save_model(result.checkpoint, "nformer", cfg, s.model->parameters(), result.fit.best_epoch);
  } else {
    auto t = make_text(*ws, cfg, seed);
    result.initial_valid_mrr = codistill::split_mrr<Real>(graph, graph.valid(), codistill::text_scorer(*t.model, graph));
    initial.text_mrr = result.initial_valid_mrr;
    logger(initial);
    if (options.epochs) {
      const auto prep = textmodel::prepare(*t.model);
      log.write({{"warmup_steps", prep.warmup_losses.size()},
                 {"warmup_first_loss", number_or_null(prep.warmup_losses.empty() ? NAN : prep.warmup_losses.front())},
                 {"warmup_last_loss", number_or_null(prep.warmup_losses.empty() ? NAN : prep.warmup_losses.back())},
                 {"empty_descriptions", prep.empty_descriptions}});
      result.fit = codistill::fit_text(*t.model, graph, options, logger);
    }
    save_model(result.checkpoint, "text", cfg, t.model->parameters(), result.fit.best_epoch);
  }
  write_manifest(out);
  return result;
}

// ---------------------------------------------------------------------------
// codistill

struct CodistillOptions {
  bool cold_start = false;
  std::string fixed_teacher;  // "", "structure" or "text"
  fs::path structure_checkpoint, text_checkpoint;  // default: <out>/<model>.ckpt
};

/// Joint training; writes nformer.codistill.ckpt, text.codistill.ckpt and
/// codistill.log.jsonl.
inline codistill::FitResult codistill_run(const RunConfig& cfg, const fs::path& out, const CodistillOptions& o,
                                          std::ostream& progress) {
  const std::uint64_t seed = cfg.seed();
  auto joint = cfg.joint();
  if (o.fixed_teacher == "structure") joint.fixed_teacher = codistill::Teacher::kStructure;
  else if (o.fixed_teacher == "text") joint.fixed_teacher = codistill::Teacher::kText;
  else if (!o.fixed_teacher.empty()) throw ConfigError("--teacher must be structure or text");
  if (o.cold_start && joint.fixed_teacher != codistill::Teacher::kNone)
    throw ConfigError("a fixed teacher needs a trained checkpoint; drop --cold-start");

  RunLock lock(out);
  const auto ws = open_workspace(out);
  auto s = make_structure(*ws, cfg, seed);
  auto t = make_text(*ws, cfg, seed);
  if (!o.cold_start) {
    const fs::path sp = o.structure_checkpoint.empty() ? out / "nformer.ckpt" : o.structure_checkpoint;
    const fs::path tp = o.text_checkpoint.empty() ? out / "text.ckpt" : o.text_checkpoint;
    restore_into(read_checkpoint(sp, "nformer"), s.model->parameters(), sp);
    restore_into(read_checkpoint(tp, "text"), t.model->parameters(), tp);
  } else {
    textmodel::prepare(*t.model);
  }
  write_config_echo(out, "codistill", cfg);
  JsonlLog log(out / "codistill.log.jsonl");
  auto r = codistill::joint_train(*s.model, *t.model, ws->graph(), joint, [&](const codistill::EpochRecord& rec) {
    log.epoch(rec);
    progress << "codistill epoch " << rec.epoch << " nformer loss " << rec.structure_loss << " mrr "
             << rec.structure_mrr << " | text loss " << rec.text_loss << " mrr " << rec.text_mrr << '\n';
  });
  save_model(out / "nformer.codistill.ckpt", "nformer", cfg, s.model->parameters(), r.best_epoch);
  save_model(out / "text.codistill.ckpt", "text", cfg, t.model->parameters(), r.best_epoch);
  write_manifest(out);
  return r;
}

// ---------------------------------------------------------------------------
// eval and analyze

struct EvalOptions {
  std::string mode = "single";    // single | probsmax | probsavg
  std::string model = "nformer";  // for single mode
  fs::path structure_checkpoint, text_checkpoint;
};

struct EvalReport {
  std::vector<std::pair<std::string, evalrank::MetricsReport>> metrics;  // tag -> metrics
  std::string table;
};

namespace detail {

inline std::vector<evalrank::QueryResult> rank_test(const Workspace& ws, const evalrank::Scorer<Real>& scorer,
                                                    std::size_t batch) {
  const auto queries = kgdata::make_queries(ws.graph(), ws.graph().test());
  if (queries.empty()) throw kgdata::DataError("test split is empty");
  return evalrank::rank_queries<Real>(ws.graph(), queries, scorer, batch);
}

inline void write_reports(const fs::path& out, const Workspace& ws, const RunConfig& cfg,
                          const std::vector<evalrank::TaggedResults>& tagged) {
  const auto edges = cfg.list("eval.degree_edges");
  write_file_text(out / "degree_bins.csv", evalrank::degree_bin_csv(tagged, ws.graph(), edges));
  if (tagged.size() >= 2)
    write_file_text(out / "overlap.csv", evalrank::overlap_csv(evalrank::overlap_report(tagged[0].results, tagged[1].results),
                                                               tagged[0].tag, tagged[1].tag));
}

}  // namespace detail

/// Ranks every test triplet on both sides; writes eval.json, the degree-bin
/// CSV and, with two models, the overlap CSV.
inline EvalReport evaluate(const RunConfig& cfg, const fs::path& out, const EvalOptions& o) {
  const bool ensemble = o.mode == "probsmax" || o.mode == "probsavg";
  if (!ensemble && o.mode != "single") throw ConfigError("unknown eval mode '" + o.mode + "'");
  if (!ensemble && o.model != "nformer" && o.model != "text") throw ConfigError("unknown model '" + o.model + "'");
  RunLock lock(out);
  const auto ws = open_workspace(out);
  const std::size_t batch = cfg.count("eval.batch_size");
  const fs::path sp = o.structure_checkpoint.empty() ? out / "nformer.ckpt" : o.structure_checkpoint;
  const fs::path tp = o.text_checkpoint.empty() ? out / "text.ckpt" : o.text_checkpoint;

  std::vector<std::pair<std::string, std::vector<evalrank::QueryResult>>> runs;
  StructureModel s;
  TextModelBundle t;
  if (ensemble || o.model == "nformer") s = load_structure(*ws, sp);
  if (ensemble || o.model == "text") t = load_text(*ws, tp);
  if (s.model) runs.emplace_back("nformer", detail::rank_test(*ws, codistill::structure_scorer(*s.model, ws->graph()), batch));
  if (t.model) runs.emplace_back("text", detail::rank_test(*ws, codistill::text_scorer(*t.model, ws->graph()), batch));
  if (ensemble) {
    const auto mode = o.mode == "probsmax" ? evalrank::EnsembleMode::kMax : evalrank::EnsembleMode::kAvg;
    const double w = cfg.real("ensemble.weight");
    auto ss = codistill::structure_scorer(*s.model, ws->graph());
    auto ts = codistill::text_scorer(*t.model, ws->graph());
    evalrank::Scorer<Real> both = [&, mode, w](std::span<const kgdata::Query> qs) {
      auto a = ss(qs);
      const auto b = ts(qs);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = evalrank::ensemble<Real>(a[i], b[i], mode, w);
      return a;
    };
    runs.emplace_back(o.mode, detail::rank_test(*ws, both, batch));
  }

  EvalReport report;
  nlohmann::json j;
  std::vector<evalrank::TaggedResults> tagged;
  for (const auto& [tag, results] : runs) {
    const auto m = evalrank::aggregate(results);
    report.metrics.emplace_back(tag, m);
    report.table += evalrank::metrics_table(m, tag);
    j[tag] = nlohmann::json::parse(evalrank::metrics_json(m));
    tagged.push_back({tag, results});
  }
  write_config_echo(out, "eval", cfg);
  write_file_text(out / (ensemble ? "eval-" + o.mode + ".json" : "eval-" + o.model + ".json"), j.dump(2) + "\n");
  detail::write_reports(out, *ws, cfg, tagged);
  write_manifest(out);
  return report;
}

/// Degree-bin and overlap reports for the two single models.
inline std::string analyze(const RunConfig& cfg, const fs::path& out, const EvalOptions& o) {
  RunLock lock(out);
  const auto ws = open_workspace(out);
  const std::size_t batch = cfg.count("eval.batch_size");
  const auto s = load_structure(*ws, o.structure_checkpoint.empty() ? out / "nformer.ckpt" : o.structure_checkpoint);
  const auto t = load_text(*ws, o.text_checkpoint.empty() ? out / "text.ckpt" : o.text_checkpoint);
  const auto rs = detail::rank_test(*ws, codistill::structure_scorer(*s.model, ws->graph()), batch);
  const auto rt = detail::rank_test(*ws, codistill::text_scorer(*t.model, ws->graph()), batch);
  const std::vector<evalrank::TaggedResults> tagged{{"nformer", rs}, {"text", rt}};
  detail::write_reports(out, *ws, cfg, tagged);
  write_manifest(out);
  const auto edges = cfg.list("eval.degree_edges");
  return evalrank::degree_bin_csv(tagged, ws->graph(), edges) + "\n" +
         evalrank::overlap_csv(evalrank::overlap_report(rs, rt), "nformer", "text");
}

}  // namespace cole::cli
