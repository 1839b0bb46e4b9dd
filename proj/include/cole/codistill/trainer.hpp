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

// Training drivers: standalone fitting with validation-based early stopping
// and the joint loop where both models learn from each other every batch.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cole/codistill/distill.hpp"
#include "cole/common/random.hpp"
#include "cole/evalrank/rank.hpp"
#include "cole/nformer/train.hpp"
#include "cole/textmodel/train.hpp"

namespace cole::codistill {

using kgdata::KnowledgeGraph;
using nformer::NFormer;
using textmodel::TextModel;

inline constexpr double kNotMeasured = std::numeric_limits<double>::quiet_NaN();

struct FitOptions {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  std::size_t patience = 10;  // 0 disables early stopping
  double lr = 5e-4;
  double weight_decay = 0.01;
  double warmup_fraction = 0.01;
  std::uint64_t seed = 7;  // data order
  bool validate = true;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double structure_loss = kNotMeasured, text_loss = kNotMeasured;
  double structure_mrr = kNotMeasured, text_mrr = kNotMeasured;
};

using EpochLogger = std::function<void(const EpochRecord&)>;

struct FitResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

/// Data-order stream shared by every driver, so standalone and joint runs
/// with the same seed see the same batches.
inline std::mt19937_64 data_stream(std::uint64_t seed) { return std::mt19937_64(derive_seed({seed, 0x64617461ULL})); }

template <typename T>
numeric::AdamW<T> make_optimizer(numeric::ParameterSet<T>& params, double lr, double weight_decay,
                                 double warmup_fraction, std::size_t total_steps) {
  numeric::AdamWConfig c;
  c.weight_decay = weight_decay;
  const std::uint64_t total = std::max<std::size_t>(total_steps, 1);
  return numeric::AdamW<T>(params, c, {lr, std::uint64_t(warmup_fraction * double(total)), total});
}

template <typename T>
std::vector<std::vector<T>> rows_of(const Tensor<T>& t) {
  std::vector<std::vector<T>> out(t.rows());
  const auto v = t.values();
  for (std::size_t r = 0; r < t.rows(); ++r) out[r].assign(v.begin() + r * t.cols(), v.begin() + (r + 1) * t.cols());
  return out;
}

/// Neighborhood-path probabilities of the structure model.
template <typename T>
evalrank::Scorer<T> structure_scorer(const NFormer<T>& model, const KnowledgeGraph& graph) {
  return [&model, &graph](std::span<const kgdata::Query> qs) {
    numeric::NoGradGuard guard;
    return rows_of(model.infer(graph, qs).neighbor_probs);
  };
}

template <typename T>
evalrank::Scorer<T> text_scorer(const TextModel<T>& model, const KnowledgeGraph& graph) {
  return [&model, &graph](std::span<const kgdata::Query> qs) {
    numeric::NoGradGuard guard;
    return rows_of(model.infer(graph, qs).probs);
  };
}

template <typename T>
double split_mrr(const KnowledgeGraph& graph, const std::vector<kgdata::Triplet>& triplets,
                 const evalrank::Scorer<T>& scorer) {
  if (triplets.empty()) return kNotMeasured;
  const auto queries = kgdata::make_queries(graph, triplets);
  const auto results = evalrank::rank_queries<T>(graph, queries, scorer);
  return evalrank::aggregate(results).overall.mrr;
}

namespace detail {

/// Tracks the best validation score and its parameter snapshot.
template <typename T>
struct BestTracker {
  explicit BestTracker(numeric::ParameterSet<T>* p) : params(p) {}

  numeric::ParameterSet<T>* params;
  double best = -1;
  std::size_t best_epoch = 0, since = 0;
  std::optional<std::vector<std::vector<T>>> snapshot;

  bool offer(double mrr, std::size_t epoch) {
    if (std::isnan(mrr)) return false;
    if (mrr > best) {
      best = mrr;
      best_epoch = epoch;
      snapshot = params->snapshot();
      since = 0;
      return true;
    }
    ++since;
    return false;
  }
  void restore() {
    if (snapshot) params->restore(*snapshot);
  }
};

template <typename T, typename Model, typename EpochFn, typename Scorer>
FitResult fit_loop(Model& model, const KnowledgeGraph& graph, const FitOptions& o, EpochFn epoch_fn, Scorer scorer,
                   bool structure, const EpochLogger& logger) {
  const std::size_t steps = o.epochs * kgdata::batches_per_epoch(graph, o.batch_size);
  auto opt = make_optimizer(model.parameters(), o.lr, o.weight_decay, o.warmup_fraction, steps);
  auto rng = data_stream(o.seed);
  BestTracker<T> best{&model.parameters()};
  FitResult r;
  for (std::size_t epoch = 1; epoch <= o.epochs; ++epoch) {
    const auto stats = epoch_fn(model, graph, opt, o.batch_size, rng);
    EpochRecord rec;
    rec.epoch = epoch;
    const double mrr = o.validate ? split_mrr<T>(graph, graph.valid(), scorer(model, graph)) : kNotMeasured;
    (structure ? rec.structure_loss : rec.text_loss) = stats.mean_loss;
    (structure ? rec.structure_mrr : rec.text_mrr) = mrr;
    best.offer(mrr, epoch);
    r.log.push_back(rec);
    if (logger) logger(rec);
    if (o.validate && o.patience && best.since >= o.patience) {
      r.stopped_early = true;
      break;
    }
  }
  best.restore();
  r.best_epoch = best.best_epoch;
  return r;
}

}  // namespace detail

/// Standalone structure-model training. With validation on, the best-MRR
/// parameters are restored at the end.
template <typename T>
FitResult fit_structure(NFormer<T>& model, const KnowledgeGraph& graph, const FitOptions& o,
                        const EpochLogger& logger = {}) {
  return detail::fit_loop<T>(
      model, graph, o, [](auto&... a) { return nformer::train_epoch(a...); },
      [](const NFormer<T>& m, const KnowledgeGraph& g) { return structure_scorer(m, g); }, true, logger);
}

/// Standalone text-model fine-tuning; run textmodel::prepare first.
template <typename T>
FitResult fit_text(TextModel<T>& model, const KnowledgeGraph& graph, const FitOptions& o,
                   const EpochLogger& logger = {}) {
  return detail::fit_loop<T>(
      model, graph, o, [](auto&... a) { return textmodel::train_epoch(a...); },
      [](const TextModel<T>& m, const KnowledgeGraph& g) { return text_scorer(m, g); }, false, logger);
}

namespace detail {

template <typename Fn>
void named_divergence(const char* model, Fn fn) {
  try {
    fn();
  } catch (const numeric::DivergenceError& e) {
    throw numeric::DivergenceError(std::string(model) + " model: " + e.what());
  }
}

}  // namespace detail

enum class Teacher { kNone, kStructure, kText };

struct JointOptions {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  std::size_t patience = 10;
  double structure_lr = 5e-4;
  double text_lr = 5e-4;
  double weight_decay = 0.01;
  double warmup_fraction = 0.01;
  std::uint64_t seed = 7;
  bool validate = true;
  DistillConfig distill;
  Teacher fixed_teacher = Teacher::kNone;  // one-way distillation from a frozen model
};

/// Per-batch losses of the joint objective:
///   structure: beta  * KD(text -> structure) + (1 - beta)  * own loss
///   text:      alpha * KD(structure -> text) + (1 - alpha) * own loss
/// KD terms are averaged the same way as the model's own loss.
template <typename T>
struct JointLosses {
  Tensor<T> structure, text;
};

template <typename T>
JointLosses<T> joint_losses(const nformer::StructureOutputs<T>& s, const textmodel::TextOutputs<T>& t,
                            std::span<const kgdata::Query> queries, std::size_t triplet_count,
                            const DistillConfig& c, bool with_structure = true, bool with_text = true) {
  std::vector<std::size_t> targets;
  for (const auto& q : queries) targets.push_back(q.target.index());
  const std::vector<T> s_logits(s.neighbor_logits.values().begin(), s.neighbor_logits.values().end());
  const std::vector<T> t_logits(t.logits.values().begin(), t.logits.values().end());
  JointLosses<T> out;
  if (with_structure) {
    Tensor<T> kd = numeric::scale(distill_batch<T>(s.neighbor_logits, t_logits, targets, c), T(1) / T(queries.size()));
    out.structure = numeric::add(numeric::scale(kd, T(c.beta)),
                                 numeric::scale(NFormer<T>::structure_loss(s), T(1 - c.beta)));
  }
  if (with_text) {
    Tensor<T> kd = numeric::scale(distill_batch<T>(t.logits, s_logits, targets, c), T(1) / T(triplet_count));
    out.text = numeric::add(numeric::scale(kd, T(c.alpha)),
                            numeric::scale(TextModel<T>::text_loss(t, triplet_count), T(1 - c.alpha)));
  }
  return out;
}

/// Joint training. Both models score the same batch, each is stepped by its
/// own optimizer on its own loss. A frozen teacher runs without dropout and
/// is never stepped.
template <typename T>
FitResult joint_train(NFormer<T>& structure, TextModel<T>& text, const KnowledgeGraph& graph, const JointOptions& o,
                      const EpochLogger& logger = {}) {
  o.distill.validate();
  const std::size_t steps = o.epochs * kgdata::batches_per_epoch(graph, o.batch_size);
  auto s_opt = make_optimizer(structure.parameters(), o.structure_lr, o.weight_decay, o.warmup_fraction, steps);
  auto t_opt = make_optimizer(text.parameters(), o.text_lr, o.weight_decay, o.warmup_fraction, steps);
  const bool train_s = o.fixed_teacher != Teacher::kStructure;
  const bool train_t = o.fixed_teacher != Teacher::kText;
  const DistillConfig& c = o.distill;
  auto rng = data_stream(o.seed);
  detail::BestTracker<T> s_best{&structure.parameters()}, t_best{&text.parameters()};
  FitResult r;
  for (std::size_t epoch = 1; epoch <= o.epochs; ++epoch) {
    double s_total = 0, t_total = 0;
    std::size_t batches = 0;
    for (const auto& batch : kgdata::epoch_batches(graph, o.batch_size, rng)) {
      const auto queries = kgdata::make_queries(graph, batch);
      nformer::StructureOutputs<T> s_out;
      textmodel::TextOutputs<T> t_out;
      detail::named_divergence("nformer", [&] {
        if (train_s) {
          s_out = structure.forward(queries, structure.sample_for(graph, queries, true), true);
        } else {
          numeric::NoGradGuard guard;
          s_out = structure.infer(graph, queries);
        }
      });
      detail::named_divergence("text", [&] {
        if (train_t) {
          t_out = text.forward(queries, text.sample_for(graph, queries, true), true);
        } else {
          numeric::NoGradGuard guard;
          t_out = text.infer(graph, queries);
        }
      });
      JointLosses<T> losses = joint_losses(s_out, t_out, queries, batch.size(), c, train_s, train_t);
      if (train_s) {
        numeric::ensure_finite(double(losses.structure.item()), "nformer");
        structure.parameters().zero_grad();
      }
      if (train_t) {
        numeric::ensure_finite(double(losses.text.item()), "text");
        text.parameters().zero_grad();
      }
      if (train_s) {
        numeric::backward(losses.structure);
        s_opt.step(structure.parameters());
        s_total += double(losses.structure.item());
      }
      if (train_t) {
        numeric::backward(losses.text);
        t_opt.step(text.parameters());
        t_total += double(losses.text.item());
      }
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    if (train_s) rec.structure_loss = s_total / double(std::max<std::size_t>(batches, 1));
    if (train_t) rec.text_loss = t_total / double(std::max<std::size_t>(batches, 1));
    bool improved = false;
    if (o.validate) {
      rec.structure_mrr = split_mrr<T>(graph, graph.valid(), structure_scorer(structure, graph));
      rec.text_mrr = split_mrr<T>(graph, graph.valid(), text_scorer(text, graph));
      if (train_s) improved |= s_best.offer(rec.structure_mrr, epoch);
      if (train_t) improved |= t_best.offer(rec.text_mrr, epoch);
    }
    r.log.push_back(rec);
    if (logger) logger(rec);
    if (improved) r.best_epoch = epoch;
    const std::size_t since = std::min(train_s ? s_best.since : SIZE_MAX, train_t ? t_best.since : SIZE_MAX);
    if (o.validate && o.patience && since >= o.patience) {
      r.stopped_early = true;
      break;
    }
  }
  s_best.restore();
  t_best.restore();
  return r;
}

}  // namespace cole::codistill
