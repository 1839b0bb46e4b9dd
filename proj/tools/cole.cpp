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

// cole: prepare | train | codistill | eval | analyze | make-toy
//
// Errors print one line "COLE-E<code>: <message>" on stderr and exit with
// <code>: 2 config, 3 data or I/O, 4 numerical divergence, 1 anything else.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cole/cli/pipeline.hpp"
#include "cole/kgdata/toy.hpp"

namespace {

using namespace cole;
namespace fs = std::filesystem;

struct Common {
  std::string config_file, profile, out_dir;
  std::vector<std::string> sets;
  std::optional<std::int64_t> seed, epochs;
  std::optional<double> ensemble_weight;
};

void add_common(CLI::App* cmd, Common& c, bool with_epochs) {
  cmd->add_option("--out-dir", c.out_dir, "Output directory (cache, checkpoints, logs, reports)")->required();
  cmd->add_option("--config", c.config_file, "Config file of key = value lines")->check(CLI::ExistingFile);
  cmd->add_option("--profile", c.profile, "desk, fb15k237 or wn18rr");
  cmd->add_option("--set", c.sets, "Override one config key (key=value); repeatable");
  cmd->add_option("--seed", c.seed, "Random seed (mandatory for training)");
  if (with_epochs) cmd->add_option("--epochs", c.epochs, "Maximum training epochs");
}

/// File, then --profile, then --set, then dedicated flags.
cli::RunConfig resolve(const Common& c, const std::string& epochs_key) {
  std::vector<std::pair<std::string, std::string>> overrides;
  if (!c.config_file.empty()) {
    const auto bytes = read_file_bytes(c.config_file);
    overrides = cli::parse_config_text(std::string(bytes.begin(), bytes.end()), c.config_file);
  }
  if (!c.profile.empty()) overrides.emplace_back("profile", c.profile);
  for (const auto& s : c.sets) overrides.push_back(cli::parse_assignment(s));
  if (c.seed) overrides.emplace_back("seed", std::to_string(*c.seed));
  if (c.epochs) overrides.emplace_back(epochs_key, std::to_string(*c.epochs));
  if (c.ensemble_weight) {
    std::ostringstream w;
    w.precision(17);
    w << *c.ensemble_weight;
    overrides.emplace_back("ensemble.weight", w.str());
  }
  return cli::RunConfig::resolve(overrides);
}

int fail(int code, const std::string& message) {
  std::string line = message;
  for (char& ch : line)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::cerr << "COLE-E" << code << ": " << line << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cole: knowledge-graph completion with co-distilled structure and text models"};
  app.require_subcommand(1);

  Common common;
  std::string data_dir, model = "nformer", mode = "single", teacher, structure_ckpt, text_ckpt, toy_dir;
  bool cold_start = false, unidirectional = false;
  std::uint64_t toy_seed = 1;

  auto* prepare = app.add_subcommand("prepare", "Load a dataset directory and cache graph, filters and vocabulary");
  prepare->add_option("--data-dir", data_dir, "Dataset directory")->required();
  prepare->add_option("--out-dir", common.out_dir, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Standalone training of one model");
  train->add_option("model", model, "nformer or text")->required()->check(CLI::IsMember({"nformer", "text"}));
  add_common(train, common, true);

  auto* codistill = app.add_subcommand("codistill", "Joint training with co-distillation");
  add_common(codistill, common, true);
  codistill->add_flag("--cold-start", cold_start, "Start from fresh models instead of standalone checkpoints");
  codistill->add_flag("--unidirectional", unidirectional, "Distill one way from a frozen teacher");
  codistill->add_option("--teacher", teacher, "Frozen teacher for --unidirectional")
      ->check(CLI::IsMember({"structure", "text"}));
  codistill->add_option("--structure-ckpt", structure_ckpt, "Structure checkpoint (default <out>/nformer.ckpt)");
  codistill->add_option("--text-ckpt", text_ckpt, "Text checkpoint (default <out>/text.ckpt)");

  auto* eval = app.add_subcommand("eval", "Filtered ranking on the test split");
  add_common(eval, common, false);
  eval->add_option("--mode", mode, "single, probsmax or probsavg")
      ->check(CLI::IsMember({"single", "probsmax", "probsavg"}));
  eval->add_option("--ensemble-weight", common.ensemble_weight, "Structure-model weight w for probsavg")
      ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--model", model, "Model for single mode")->check(CLI::IsMember({"nformer", "text"}));
  eval->add_option("--structure-ckpt", structure_ckpt, "Structure checkpoint (default <out>/nformer.ckpt)");
  eval->add_option("--text-ckpt", text_ckpt, "Text checkpoint (default <out>/text.ckpt)");

  auto* analyze = app.add_subcommand("analyze", "Degree-bin and overlap reports for both models");
  add_common(analyze, common, false);
  analyze->add_option("--structure-ckpt", structure_ckpt, "Structure checkpoint (default <out>/nformer.ckpt)");
  analyze->add_option("--text-ckpt", text_ckpt, "Text checkpoint (default <out>/text.ckpt)");

  auto* make_toy = app.add_subcommand("make-toy", "Write the 50-entity toy dataset");
  make_toy->add_option("dir", toy_dir, "Target directory")->required();
  make_toy->add_option("--split-seed", toy_seed, "Seed of the train/valid/test split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, e.what());
  }

  try {
    const fs::path out = common.out_dir;
    if (*prepare) {
      const auto r = cli::prepare(data_dir, out);
      std::cout << (r.reused ? "cache reused\n" : "cache built\n") << r.summary();
    } else if (*train) {
      const auto cfg = resolve(common, "train.epochs");
      const auto r = cli::train(cfg, out, model, std::cout);
      std::cout << "best epoch " << r.fit.best_epoch << (r.fit.stopped_early ? " (early stop)" : "") << "\ncheckpoint "
                << r.checkpoint.string() << '\n';
    } else if (*codistill) {
      if (unidirectional && teacher.empty()) return fail(2, "--unidirectional needs --teacher structure|text");
      if (!unidirectional && !teacher.empty()) return fail(2, "--teacher only applies with --unidirectional");
      const auto cfg = resolve(common, "distill.epochs");
      cli::CodistillOptions o{cold_start, teacher, structure_ckpt, text_ckpt};
      const auto r = cli::codistill_run(cfg, out, o, std::cout);
      std::cout << "best epoch " << r.best_epoch << (r.stopped_early ? " (early stop)" : "") << '\n';
    } else if (*eval) {
      const auto cfg = resolve(common, "");
      std::cout << cli::evaluate(cfg, out, {mode, model, structure_ckpt, text_ckpt}).table;
    } else if (*analyze) {
      const auto cfg = resolve(common, "");
      std::cout << cli::analyze(cfg, out, {"single", "nformer", structure_ckpt, text_ckpt});
    } else if (*make_toy) {
      kgdata::ToyOptions o;
      o.split_seed = toy_seed;
      kgdata::write_toy_dataset(toy_dir, o);
      std::cout << "toy dataset written to " << toy_dir << '\n';
    }
  } catch (const cli::ConfigError& e) {
    return fail(2, e.what());
  } catch (const codistill::DistillError& e) {
    return fail(2, e.what());
  } catch (const numeric::DivergenceError& e) {
    return fail(4, e.what());
  } catch (const kgdata::DataError& e) {
    return fail(3, e.what());
  } catch (const IoError& e) {
    return fail(3, e.what());
  } catch (const FormatError& e) {
    return fail(3, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(3, e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
  return 0;
}
