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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "cole/cli/pipeline.hpp"
#include "cole/kgdata/toy.hpp"
#include "oracles.hpp"

using namespace cole;
using namespace cole::cli;
namespace fs = std::filesystem;

namespace {

/// Fresh scratch directory per test, removed afterwards.
class ScratchDir {
 public:
  ScratchDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / ("cole_cli_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<std::pair<std::string, std::string>> small_overrides(std::uint64_t seed = 7) {
  return {{"seed", std::to_string(seed)}, {"nformer.dim", "8"},       {"nformer.layers", "1"},
          {"text.dim", "8"},              {"text.layers", "1"},       {"text.max_len", "64"},
          {"text.warmup_steps", "5"},     {"train.epochs", "2"},      {"distill.epochs", "2"},
          {"train.batch_size", "64"}};
}

RunConfig small_config(std::vector<std::pair<std::string, std::string>> extra = {}) {
  auto o = small_overrides();
  o.insert(o.end(), extra.begin(), extra.end());
  return RunConfig::resolve(o);
}

fs::path prepared(const ScratchDir& dir) {
  kgdata::write_toy_dataset(dir.path() / "data");
  prepare(dir.path() / "data", dir.path() / "run");
  return dir.path() / "run";
}

std::string slurp(const fs::path& p) {
  const auto b = read_file_bytes(p);
  return {b.begin(), b.end()};
}

std::size_t line_count(const fs::path& p) {
  const auto s = slurp(p);
  return std::size_t(std::count(s.begin(), s.end(), '\n'));
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(COLE_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DeskDefaultsAndProfilePresets) {
  const auto desk = RunConfig::resolve({});
  EXPECT_EQ(desk.count("nformer.dim"), 64u);
  EXPECT_EQ(desk.count("train.batch_size"), 64u);
  EXPECT_EQ(desk.count("train.epochs"), 200u);
  EXPECT_EQ(desk.count("train.patience"), 10u);
  const auto fb = RunConfig::resolve({{"profile", "fb15k237"}});
  EXPECT_EQ(fb.count("nformer.dim"), 256u);
  EXPECT_EQ(fb.count("nformer.layers"), 8u);
  EXPECT_DOUBLE_EQ(fb.real("distill.beta"), 0.8);
  const auto wn = RunConfig::resolve({{"profile", "wn18rr"}, {"nformer.layers", "3"}});
  EXPECT_EQ(wn.count("nformer.layers"), 3u);  // explicit key beats the preset
  EXPECT_EQ(wn.count("text.heads"), 4u);
  EXPECT_DOUBLE_EQ(wn.real("distill.beta"), 0.7);
}

TEST(Config, PerModelBatchSizeFallsBackToTheSharedOne) {
  const auto shared = RunConfig::resolve({{"seed", "1"}, {"train.batch_size", "16"}});
  EXPECT_EQ(shared.fit("nformer").batch_size, 16u);
  EXPECT_EQ(shared.fit("text").batch_size, 16u);
  const auto own = RunConfig::resolve({{"seed", "1"}, {"train.batch_size", "16"}, {"nformer.batch_size", "8"}});
  EXPECT_EQ(own.fit("nformer").batch_size, 8u);
  EXPECT_EQ(own.fit("text").batch_size, 16u);
  EXPECT_EQ(own.joint().batch_size, 16u);
}

TEST(Config, RejectsUnknownKeysBadTypesAndProfiles) {
  EXPECT_THROW(RunConfig::resolve({{"nformer.dims", "8"}}), ConfigError);
  EXPECT_THROW(RunConfig::resolve({{"nformer.dim", "eight"}}), ConfigError);
  EXPECT_THROW(RunConfig::resolve({{"nformer.dropout", "0.1x"}}), ConfigError);
  EXPECT_THROW(RunConfig::resolve({{"text.neighbor_desc", "yes"}}), ConfigError);
  EXPECT_THROW(RunConfig::resolve({{"profile", "huge"}}), ConfigError);
  EXPECT_THROW(RunConfig::resolve({{"distill.alpha", "1.5"}}).distill(), ConfigError);
}

TEST(Config, SeedIsMandatoryForTraining) {
  const auto c = RunConfig::resolve({});
  EXPECT_THROW(c.seed(), ConfigError);
  EXPECT_THROW(c.fit("nformer"), ConfigError);
  EXPECT_EQ(RunConfig::resolve({{"seed", "7"}}).seed(), 7u);
}

TEST(Config, FileSyntaxAndEchoRoundTrip) {
  const auto parsed = parse_config_text("# comment\n nformer.dim = 16  # trailing\n\nseed=3\n", "f");
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[0], (std::pair<std::string, std::string>{"nformer.dim", "16"}));
  EXPECT_THROW(parse_config_text("nformer.dim 16\n", "f"), ConfigError);
  const auto c = RunConfig::resolve(parsed);
  const auto again = RunConfig::resolve(parse_config_text(c.echo(), "echo"));
  EXPECT_EQ(c.echo(), again.echo());
  EXPECT_EQ(parse_assignment("a.b = 2"), (std::pair<std::string, std::string>{"a.b", "2"}));
  EXPECT_THROW(parse_assignment("a.b"), ConfigError);
}

TEST(Prepare, BuildsThenReusesTheCache) {
  ScratchDir dir;
  kgdata::write_toy_dataset(dir.path() / "data");
  const auto first = prepare(dir.path() / "data", dir.path() / "run");
  EXPECT_FALSE(first.reused);
  EXPECT_EQ(first.entities, 50u);
  EXPECT_EQ(first.relations, 5u);
  EXPECT_EQ(first.train + first.valid + first.test, 300u);
  EXPECT_TRUE(fs::exists(dir.path() / "run" / kCacheFile));
  EXPECT_TRUE(fs::exists(dir.path() / "run" / kVocabFile));
  const auto stamp = fs::last_write_time(dir.path() / "run" / kCacheFile);
  const auto second = prepare(dir.path() / "data", dir.path() / "run");
  EXPECT_TRUE(second.reused);
  EXPECT_EQ(fs::last_write_time(dir.path() / "run" / kCacheFile), stamp);
}

TEST(Prepare, ChangedDatasetRebuilds) {
  ScratchDir dir;
  const auto run = prepared(dir);
  {
    std::ofstream out(dir.path() / "data" / "train.txt", std::ios::app);
    out << "/toy/e0\tadjacent to\t/toy/e49\n";
  }
  const auto again = prepare(dir.path() / "data", run);
  EXPECT_FALSE(again.reused);
}

TEST(Prepare, TamperedCacheIsRejected) {
  ScratchDir dir;
  const auto run = prepared(dir);
  auto bytes = read_file_bytes(run / kCacheFile);
  bytes[bytes.size() / 2] ^= 1;
  write_file_bytes(run / kCacheFile, bytes);
  EXPECT_THROW(prepare(dir.path() / "data", run), kgdata::DataError);
  EXPECT_THROW(open_workspace(run), kgdata::DataError);
}

TEST(Prepare, MissingFileIsNamed) {
  ScratchDir dir;
  kgdata::write_toy_dataset(dir.path() / "data");
  fs::remove(dir.path() / "data" / "valid.txt");
  try {
    prepare(dir.path() / "data", dir.path() / "run");
    FAIL() << "expected a data error";
  } catch (const kgdata::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("valid.txt"), std::string::npos) << e.what();
  }
}

TEST(RunLock, SecondClaimFails) {
  ScratchDir dir;
  RunLock lock(dir.path());
  EXPECT_THROW(RunLock again(dir.path()), ConfigError);
}

TEST(Manifest, ListsEveryArtifactWithItsHash) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::istringstream in(slurp(run / kManifestFile));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    ASSERT_NE(tab, std::string::npos);
    EXPECT_EQ(line.substr(0, tab), sha256_file(run / line.substr(tab + 1)));
    ++rows;
  }
  EXPECT_EQ(rows, 3u);  // cache, vocabulary, stats
}

TEST(Train, WritesCheckpointLogAndConfigEcho) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::ostringstream progress;
  const auto r = train(small_config(), run, "nformer", progress);
  EXPECT_TRUE(fs::exists(run / "nformer.ckpt"));
  EXPECT_EQ(line_count(run / "train-nformer.log.jsonl"), 3u);  // epoch 0 plus two epochs
  const auto log = slurp(run / "train-nformer.log.jsonl");
  const auto first = nlohmann::json::parse(log.substr(0, log.find('\n')));
  EXPECT_EQ(first["epoch"], 0);
  EXPECT_TRUE(first["structure_valid_mrr"].is_number());
  EXPECT_EQ(slurp(run / "train-nformer.config.txt"), small_config().echo());
  EXPECT_NE(slurp(run / kManifestFile).find("nformer.ckpt"), std::string::npos);
  EXPECT_EQ(r.fit.log.size(), 2u);
}

TEST(Train, SameSeedGivesIdenticalLogsForBothModels) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::ostringstream sink;
  for (const std::string model : {"nformer", "text"}) {
    train(small_config(), run, model, sink);
    const auto a = sha256_file(run / ("train-" + model + ".log.jsonl"));
    const auto ck = sha256_file(run / (model + ".ckpt"));
    train(small_config(), run, model, sink);
    EXPECT_EQ(a, sha256_file(run / ("train-" + model + ".log.jsonl"))) << model;
    EXPECT_EQ(ck, sha256_file(run / (model + ".ckpt"))) << model;
  }
}

TEST(Train, ZeroEpochsStoresTheInitializationNearTheRandomBaseline) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::ostringstream sink;
  const auto r = train(small_config({{"train.epochs", "0"}}), run, "nformer", sink);
  EXPECT_TRUE(r.fit.log.empty());
  const auto ws = open_workspace(run);
  const auto queries = kgdata::make_queries(ws->graph(), ws->graph().valid());
  std::vector<std::size_t> candidates;
  for (const auto& q : queries)
    candidates.push_back(ws->graph().entity_count() - evalrank::competitors(ws->graph(), q).size());
  const double baseline = oracle::shuffled_score_mrr(candidates, 200, 1);
  EXPECT_GT(r.initial_valid_mrr, 0.4 * baseline);
  EXPECT_LT(r.initial_valid_mrr, 2.5 * baseline);
  // The stored parameters are the initialization: reloading reproduces the score.
  const auto s = load_structure(*ws, run / "nformer.ckpt");
  EXPECT_EQ(codistill::split_mrr<Real>(ws->graph(), ws->graph().valid(), codistill::structure_scorer(*s.model, ws->graph())),
            r.initial_valid_mrr);
}

TEST(Train, DivergenceIsReported) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::ostringstream sink;
  EXPECT_THROW(train(small_config({{"nformer.lr", "1e30"}}), run, "nformer", sink), numeric::DivergenceError);
}

TEST(Codistill, ZeroWeightsMatchContinuedStandaloneTraining) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::ostringstream sink;
  const auto cfg = small_config({{"distill.alpha", "0"}, {"distill.beta", "0"}, {"distill.patience", "0"},
                                 {"train.patience", "0"}, {"distill.epochs", "3"}});
  train(cfg, run, "nformer", sink);
  train(cfg, run, "text", sink);
  codistill_run(cfg, run, {}, sink);

  const auto ws = open_workspace(run);
  auto s = load_structure(*ws, run / "nformer.ckpt", cfg.seed());
  auto t = load_text(*ws, run / "text.ckpt", cfg.seed());
  const auto joint = cfg.joint();
  codistill::FitOptions f;
  f.epochs = joint.epochs;
  f.batch_size = joint.batch_size;
  f.patience = 0;
  f.weight_decay = joint.weight_decay;
  f.warmup_fraction = joint.warmup_fraction;
  f.seed = joint.seed;
  f.lr = joint.structure_lr;
  codistill::fit_structure(*s.model, ws->graph(), f);
  f.lr = joint.text_lr;
  codistill::fit_text(*t.model, ws->graph(), f);

  const auto s_joint = load_structure(*ws, run / "nformer.codistill.ckpt");
  const auto t_joint = load_text(*ws, run / "text.codistill.ckpt");
  EXPECT_EQ(s.model->parameters().snapshot(), s_joint.model->parameters().snapshot());
  EXPECT_EQ(t.model->parameters().snapshot(), t_joint.model->parameters().snapshot());
}

TEST(Codistill, DefaultWeightsLogBothModelsEveryEpoch) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::ostringstream sink;
  const auto cfg = small_config();
  EXPECT_DOUBLE_EQ(cfg.real("distill.alpha"), 0.5);
  train(cfg, run, "nformer", sink);
  train(cfg, run, "text", sink);
  codistill_run(cfg, run, {}, sink);
  std::istringstream in(slurp(run / "codistill.log.jsonl"));
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j["structure_loss"].is_number());
    EXPECT_TRUE(j["text_loss"].is_number());
    EXPECT_TRUE(j["structure_valid_mrr"].is_number());
    EXPECT_TRUE(j["text_valid_mrr"].is_number());
    ++epochs;
  }
  EXPECT_EQ(epochs, 2u);
}

TEST(Codistill, EarlyStopAfterPatience) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::ostringstream sink;
  const auto cfg = small_config({{"distill.structure_lr", "0"}, {"distill.text_lr", "0"}, {"distill.patience", "2"},
                                 {"distill.epochs", "20"}});
  const auto r = codistill_run(cfg, run, {true, "", {}, {}}, sink);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(line_count(run / "codistill.log.jsonl"), 3u);
}

TEST(Codistill, IncompatibleCheckpointIsAnError) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::ostringstream sink;
  train(small_config(), run, "nformer", sink);
  train(small_config(), run, "text", sink);
  EXPECT_THROW(codistill_run(small_config({{"nformer.dim", "16"}}), run, {}, sink), ConfigError);
}

TEST(Codistill, MissingCheckpointIsAnError) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::ostringstream sink;
  EXPECT_THROW(codistill_run(small_config(), run, {}, sink), kgdata::DataError);
}

TEST(Eval, SingleAndEnsembleModes) {
  ScratchDir dir;
  const auto run = prepared(dir);
  std::ostringstream sink;
  train(small_config(), run, "nformer", sink);
  train(small_config(), run, "text", sink);
  const auto single = evaluate(small_config(), run, {"single", "nformer", {}, {}});
  ASSERT_EQ(single.metrics.size(), 1u);
  const auto json = nlohmann::json::parse(slurp(run / "eval-nformer.json"));
  for (const char* key : {"hits@1", "hits@3", "hits@10", "mrr"}) EXPECT_TRUE(json["nformer"]["overall"].contains(key)) << key;
  EXPECT_TRUE(fs::exists(run / "degree_bins.csv"));

  const auto avg = evaluate(small_config({{"ensemble.weight", "1"}}), run, {"probsavg", "", {}, {}});
  ASSERT_EQ(avg.metrics.size(), 3u);
  EXPECT_EQ(avg.metrics[2].first, "probsavg");
  const auto& s = single.metrics[0].second.overall;
  const auto& e = avg.metrics[2].second.overall;
  EXPECT_EQ(s.mrr, e.mrr);
  EXPECT_EQ(s.hits1, e.hits1);
  EXPECT_EQ(s.hits10, e.hits10);
  EXPECT_TRUE(fs::exists(run / "overlap.csv"));

  const auto mx = evaluate(small_config(), run, {"probsmax", "", {}, {}});
  EXPECT_EQ(mx.metrics.size(), 3u);
  EXPECT_NE(analyze(small_config(), run, {}).find("only_nformer,both,only_text"), std::string::npos);
}

TEST(Eval, MissingCheckpointIsAnError) {
  ScratchDir dir;
  const auto run = prepared(dir);
  EXPECT_THROW(evaluate(small_config(), run, {"single", "text", {}, {}}), kgdata::DataError);
}

TEST(Binary, ExitCodes) {
  ScratchDir dir;
  const std::string d = dir.path().string();
  EXPECT_EQ(run_binary("--help"), 0);
  EXPECT_EQ(run_binary("frobnicate"), 2);
  EXPECT_EQ(run_binary("make-toy " + d + "/data"), 0);
  EXPECT_EQ(run_binary("prepare --data-dir " + d + "/nowhere --out-dir " + d + "/run"), 3);
  EXPECT_EQ(run_binary("prepare --data-dir " + d + "/data --out-dir " + d + "/run"), 0);
  EXPECT_EQ(run_binary("train nformer --out-dir " + d + "/run --epochs 1"), 2);  // no seed
  EXPECT_EQ(run_binary("train nformer --out-dir " + d + "/run --seed 1 --set nope=1"), 2);
  EXPECT_EQ(run_binary("train nformer --out-dir " + d + "/run --seed 1 --epochs 1 --set nformer.dim=8 --set nformer.lr=1e30"), 4);
  EXPECT_EQ(run_binary("eval --out-dir " + d + "/run --model text"), 3);
  EXPECT_EQ(run_binary("eval --out-dir " + d + "/run --mode probsavg --ensemble-weight 1.5"), 2);
}

TEST(Binary, ErrorsAreOneMachineParsableLine) {
  ScratchDir dir;
  const std::string cmd = std::string(COLE_BINARY) + " train nformer --out-dir " + dir.path().string() +
                          " --seed 1 2>&1 >/dev/null";
  std::FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  std::string out;
  char buf[256];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  pclose(pipe);
  EXPECT_EQ(out.rfind("COLE-E3: ", 0), 0u) << out;
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 1);
}
