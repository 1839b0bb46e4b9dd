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

// Filtered ranking, Hits@k / MRR aggregation and two-model ensembles.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cole/kgdata/graph.hpp"

namespace cole::evalrank {

using kgdata::EntityId;
using kgdata::KnowledgeGraph;
using kgdata::Query;
using kgdata::Side;

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 1-based rank of `target` once every `filtered` entity is removed. Equal
/// scores count against the target.
template <typename S>
std::size_t filtered_rank(std::span<const S> scores, std::size_t target, std::span<const EntityId> filtered) {
  if (target >= scores.size()) throw EvalError("filtered_rank: target out of range");
  const S t = scores[target];
  if (std::isnan(double(t))) throw EvalError("filtered_rank: NaN score for target");
  std::vector<char> skip(scores.size(), 0);
  for (EntityId e : filtered) {
    if (e.index() == target) throw EvalError("filtered_rank: target is in its own filter set");
    skip.at(e.index()) = 1;
  }
  std::size_t rank = 1;
  for (std::size_t e = 0; e < scores.size(); ++e)
    if (e != target && !skip[e] && !(scores[e] < t)) ++rank;
  return rank;
}

/// Known-true answers of `q` other than its target.
inline std::vector<EntityId> competitors(const KnowledgeGraph& graph, const Query& q) {
  std::vector<EntityId> out;
  for (EntityId e : graph.filter_set(q.source, q.relation))
    if (e != q.target) out.push_back(e);
  return out;
}

struct QueryResult {
  Query query;
  std::size_t rank = 0;
};

struct SideMetrics {
  double hits1 = 0, hits3 = 0, hits10 = 0, mrr = 0;
  std::size_t count = 0;
};

struct MetricsReport {
  SideMetrics overall, head, tail;
  std::size_t count = 0;
};

inline SideMetrics side_metrics(std::span<const QueryResult> results, Side side) {
  SideMetrics m;
  for (const auto& r : results) {
    if (r.query.side != side) continue;
    if (r.rank == 0) throw EvalError("aggregate: rank 0");
    ++m.count;
    m.hits1 += r.rank <= 1;
    m.hits3 += r.rank <= 3;
    m.hits10 += r.rank <= 10;
    m.mrr += 1.0 / double(r.rank);
  }
  if (m.count) {
    const double n = double(m.count);
    m.hits1 /= n;
    m.hits3 /= n;
    m.hits10 /= n;
    m.mrr /= n;
  }
  return m;
}

/// Per-side metrics; overall is the unweighted mean of the two sides (or the
/// single side present).
inline MetricsReport aggregate(std::span<const QueryResult> results) {
  if (results.empty()) throw EvalError("aggregate: no results");
  MetricsReport r;
  r.count = results.size();
  r.head = side_metrics(results, Side::kHead);
  r.tail = side_metrics(results, Side::kTail);
  if (!r.head.count) {
    r.overall = r.tail;
  } else if (!r.tail.count) {
    r.overall = r.head;
  } else {
    r.overall.hits1 = (r.head.hits1 + r.tail.hits1) / 2;
    r.overall.hits3 = (r.head.hits3 + r.tail.hits3) / 2;
    r.overall.hits10 = (r.head.hits10 + r.tail.hits10) / 2;
    r.overall.mrr = (r.head.mrr + r.tail.mrr) / 2;
  }
  r.overall.count = r.count;
  return r;
}

enum class EnsembleMode { kAvg, kMax };

/// avg: w * structure + (1 - w) * text. max: elementwise maximum (a score
/// vector, not a distribution).
template <typename S>
std::vector<S> ensemble(std::span<const S> structure, std::span<const S> text, EnsembleMode mode, double w = 0.5) {
  if (structure.size() != text.size()) throw EvalError("ensemble: distributions differ in length");
  if (!(w >= 0 && w <= 1)) throw EvalError("ensemble: weight outside [0, 1]");
  std::vector<S> out(structure.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mode == EnsembleMode::kMax ? std::max(structure[i], text[i])
                                        : S(w) * structure[i] + S(1 - w) * text[i];
  }
  return out;
}

/// Batch scorer: one score row of length |E| per query.
template <typename S>
using Scorer = std::function<std::vector<std::vector<S>>(std::span<const Query>)>;

/// COLE_THREADS when set and positive, else the hardware concurrency.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("COLE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return std::size_t(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Ranks every query. Batches fan out over worker threads; the scorer must
/// be safe to call concurrently.
template <typename S>
std::vector<QueryResult> rank_queries(const KnowledgeGraph& graph, std::span<const Query> queries,
                                      const Scorer<S>& score, std::size_t batch = 64, std::size_t workers = 0) {
  std::vector<QueryResult> out(queries.size());
  const std::size_t batches = (queries.size() + batch - 1) / batch;
  auto run = [&](std::size_t b) {
    const std::size_t begin = b * batch, end = std::min(queries.size(), begin + batch);
    const auto chunk = queries.subspan(begin, end - begin);
    const auto scores = score(chunk);
    if (scores.size() != chunk.size()) throw EvalError("scorer returned the wrong number of rows");
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto filter = competitors(graph, chunk[i]);
      out[begin + i] = {chunk[i], filtered_rank<S>(scores[i], chunk[i].target.index(), filter)};
    }
  };
  if (workers == 0) workers = worker_count();
  workers = std::min(workers, std::max<std::size_t>(batches, 1));
  if (workers <= 1) {
    for (std::size_t b = 0; b < batches; ++b) run(b);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < batches; b += workers) run(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---- reports ----------------------------------------------------------------

inline std::string metrics_json(const MetricsReport& m) {
  std::ostringstream out;
  out << std::setprecision(10);
  auto side = [&](const char* name, const SideMetrics& s) {
    out << '"' << name << "\":{\"hits@1\":" << s.hits1 << ",\"hits@3\":" << s.hits3 << ",\"hits@10\":" << s.hits10
        << ",\"mrr\":" << s.mrr << ",\"count\":" << s.count << '}';
  };
  out << '{';
  side("overall", m.overall);
  out << ',';
  side("head", m.head);
  out << ',';
  side("tail", m.tail);
  out << '}';
  return out.str();
}

inline std::string metrics_table(const MetricsReport& m, const std::string& tag) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(12) << tag << std::setw(10) << "side" << std::right << std::setw(9) << "Hits@1"
      << std::setw(9) << "Hits@3" << std::setw(9) << "Hits@10" << std::setw(9) << "MRR" << std::setw(8) << "n"
      << '\n';
  auto row = [&](const char* name, const SideMetrics& s) {
    out << std::left << std::setw(12) << "" << std::setw(10) << name << std::right << std::setw(9) << s.hits1
        << std::setw(9) << s.hits3 << std::setw(9) << s.hits10 << std::setw(9) << s.mrr << std::setw(8) << s.count
        << '\n';
  };
  row("overall", m.overall);
  row("head", m.head);
  row("tail", m.tail);
  return out.str();
}

/// Degree bin of `degree` given ascending lower edges; the last bin is open.
/// Degree 0 (entities seen only outside train) gets its own bin.
inline std::string degree_bin_label(std::size_t degree, std::span<const std::size_t> edges) {
  if (degree < edges.front()) return "[0," + std::to_string(edges.front()) + ")";
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (degree < edges[i + 1]) return "[" + std::to_string(edges[i]) + "," + std::to_string(edges[i + 1]) + ")";
  return "[" + std::to_string(edges.back()) + ",inf)";
}

struct TaggedResults {
  std::string tag;
  std::span<const QueryResult> results;
};

struct DegreeBin {
  std::string label;
  std::size_t queries = 0;
  std::vector<double> hits1;  // one per model tag
};

/// Hits@1 per train-degree bin of each query's seen entity.
inline std::vector<DegreeBin> degree_bins(std::span<const TaggedResults> models, const KnowledgeGraph& graph,
                                          std::span<const std::size_t> edges) {
  if (edges.empty() || !std::is_sorted(edges.begin(), edges.end()) || edges.front() < 1)
    throw EvalError("degree bins: edges must be ascending and start at 1 or above");
  if (models.empty()) throw EvalError("degree bins: no results");
  std::vector<std::string> labels;
  if (edges.front() > 0) labels.push_back(degree_bin_label(0, edges));
  for (std::size_t i = 0; i < edges.size(); ++i) labels.push_back(degree_bin_label(edges[i], edges));
  std::vector<DegreeBin> bins;
  for (auto& l : labels) bins.push_back({l, 0, std::vector<double>(models.size(), 0.0)});
  auto bin_of = [&](const Query& q) {
    const auto l = degree_bin_label(graph.degree(q.source), edges);
    return std::size_t(std::find(labels.begin(), labels.end(), l) - labels.begin());
  };
  const auto& first = models.front().results;
  for (std::size_t i = 0; i < first.size(); ++i) {
    const std::size_t b = bin_of(first[i].query);
    ++bins[b].queries;
    for (std::size_t m = 0; m < models.size(); ++m) {
      if (models[m].results.size() != first.size()) throw EvalError("degree bins: result sets differ in size");
      bins[b].hits1[m] += models[m].results[i].rank == 1;
    }
  }
  for (auto& b : bins)
    for (auto& h : b.hits1) h = b.queries ? h / double(b.queries) : 0.0;
  return bins;
}

inline std::string degree_bin_csv(std::span<const TaggedResults> models, const KnowledgeGraph& graph,
                                  std::span<const std::size_t> edges) {
  const auto bins = degree_bins(models, graph, edges);
  std::ostringstream out;
  out << std::setprecision(6) << "bin,queries";
  for (const auto& m : models) out << ",hits@1_" << m.tag;
  out << '\n';
  for (const auto& b : bins) {
    out << b.label << ',' << b.queries;
    for (double h : b.hits1) out << ',' << h;
    out << '\n';
  }
  return out.str();
}

struct Overlap {
  std::size_t only_a = 0, both = 0, only_b = 0;
};

inline bool same_query(const Query& a, const Query& b) {
  return a.side == b.side && a.source == b.source && a.relation == b.relation && a.target == b.target;
}

/// Split of rank-1 hits between two result sets over the same queries.
inline Overlap overlap_report(std::span<const QueryResult> a, std::span<const QueryResult> b) {
  if (a.size() != b.size()) throw EvalError("overlap: query sets differ");
  Overlap o;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_query(a[i].query, b[i].query)) throw EvalError("overlap: query sets differ");
    const bool ha = a[i].rank == 1, hb = b[i].rank == 1;
    o.only_a += ha && !hb;
    o.both += ha && hb;
    o.only_b += !ha && hb;
  }
  return o;
}

inline std::string overlap_csv(const Overlap& o, const std::string& tag_a, const std::string& tag_b) {
  return "only_" + tag_a + ",both,only_" + tag_b + "\n" + std::to_string(o.only_a) + "," + std::to_string(o.both) +
         "," + std::to_string(o.only_b) + "\n";
}

}  // namespace cole::evalrank
