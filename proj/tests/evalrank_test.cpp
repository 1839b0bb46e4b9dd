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

#include <random>
#include <set>

#include "cole/evalrank/rank.hpp"
#include "cole/kgdata/toy.hpp"
#include "oracles.hpp"

using namespace cole;
using namespace cole::evalrank;
using kgdata::Side;

namespace {

std::vector<EntityId> ids(std::initializer_list<std::size_t> v) {
  std::vector<EntityId> out;
  for (auto i : v) out.push_back(kgdata::entity_at(i));
  return out;
}

QueryResult result(Side side, std::size_t rank, std::size_t id = 0) {
  QueryResult r;
  r.query.side = side;
  r.query.source = kgdata::entity_at(id);
  r.query.target = kgdata::entity_at(id + 1);
  r.rank = rank;
  return r;
}

kgdata::KnowledgeGraph toy_graph() {
  auto data = kgdata::make_toy_dataset();
  data.graph.add_reverse_relations();
  return std::move(data.graph);
}

}  // namespace

TEST(FilteredRank, Examples) {
  const std::vector<double> p{0.5, 0.3, 0.2};
  EXPECT_EQ(filtered_rank<double>(p, 0, {}), 1u);
  EXPECT_EQ(filtered_rank<double>(p, 2, ids({1})), 2u);
  EXPECT_EQ(filtered_rank<double>(p, 2, {}), 3u);
}

TEST(FilteredRank, TiesCountAgainstTheTarget) {
  const std::vector<double> p{0.4, 0.4, 0.2};
  EXPECT_EQ(filtered_rank<double>(p, 0, {}), 2u);
  EXPECT_EQ(filtered_rank<double>(p, 1, {}), 2u);
}

TEST(FilteredRank, RejectsFilteredTargetAndBadInput) {
  const std::vector<double> p{0.5, 0.3, 0.2};
  EXPECT_THROW(filtered_rank<double>(p, 1, ids({1})), EvalError);
  EXPECT_THROW(filtered_rank<double>(p, 3, {}), EvalError);
  const std::vector<double> nan{std::nan(""), 0.1};
  EXPECT_THROW(filtered_rank<double>(nan, 0, {}), EvalError);
}

TEST(FilteredRank, MatchesSortOracleOnToyQueries) {
  const auto g = toy_graph();
  std::vector<kgdata::Triplet> all = g.original_train();
  all.insert(all.end(), g.valid().begin(), g.valid().end());
  all.insert(all.end(), g.test().begin(), g.test().end());
  const auto queries = kgdata::make_queries(g, all);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> coarse(0, 20);  // few levels, so ties are common
  std::size_t checked = 0;
  for (std::size_t i = 0; i < 500; ++i) {
    const auto& q = queries[rng() % queries.size()];
    std::vector<double> scores(50);
    for (double& s : scores) s = coarse(rng) / 20.0;
    const auto comp = competitors(g, q);
    std::vector<std::size_t> filter;
    for (auto e : comp) filter.push_back(e.index());
    EXPECT_EQ(filtered_rank<double>(scores, q.target.index(), comp), oracle::sorted_rank(scores, q.target.index(), filter));
    ++checked;
  }
  EXPECT_EQ(checked, 500u);
}

TEST(Aggregate, SingleRankOne) {
  const std::vector<QueryResult> r{result(Side::kTail, 1)};
  const auto m = aggregate(r);
  EXPECT_EQ(m.overall.hits1, 1.0);
  EXPECT_EQ(m.overall.hits10, 1.0);
  EXPECT_EQ(m.overall.mrr, 1.0);
}

TEST(Aggregate, Arithmetic) {
  const std::vector<QueryResult> r{result(Side::kTail, 1), result(Side::kTail, 10)};
  const auto m = aggregate(r);
  EXPECT_DOUBLE_EQ(m.overall.hits1, 0.5);
  EXPECT_DOUBLE_EQ(m.overall.hits3, 0.5);
  EXPECT_DOUBLE_EQ(m.overall.hits10, 1.0);
  EXPECT_DOUBLE_EQ(m.overall.mrr, 0.55);
}

TEST(Aggregate, OverallIsTheMeanOfSidesRegardlessOfCounts) {
  // Head ranks {1, 4, 4, 4, 4} give MRR 0.4; tail ranks {1, 5} give 0.6.
  std::vector<QueryResult> r{result(Side::kHead, 1), result(Side::kTail, 1), result(Side::kTail, 5)};
  for (int i = 0; i < 4; ++i) r.push_back(result(Side::kHead, 4));
  const auto m = aggregate(r);
  EXPECT_DOUBLE_EQ(m.head.mrr, 0.4);
  EXPECT_DOUBLE_EQ(m.tail.mrr, 0.6);
  EXPECT_DOUBLE_EQ(m.overall.mrr, 0.5);
  EXPECT_EQ(m.count, 7u);
}

TEST(Aggregate, EmptyIsAnError) { EXPECT_THROW(aggregate({}), EvalError); }

TEST(Aggregate, MonotoneAndBoundedOnRandomResults) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<QueryResult> r;
    const std::size_t n = 1 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) r.push_back(result(rng() % 2 ? Side::kHead : Side::kTail, 1 + rng() % 30));
    const auto m = aggregate(r);
    for (const auto* s : {&m.overall, &m.head, &m.tail}) {
      EXPECT_LE(s->hits1, s->hits3);
      EXPECT_LE(s->hits3, s->hits10);
      EXPECT_LE(s->hits10, 1.0);
      EXPECT_LE(s->hits1, s->mrr + 1e-15);
      EXPECT_LE(s->mrr, 1.0);
    }
    EXPECT_GT(m.overall.mrr, 0.0);
  }
}

TEST(Ensemble, EqualInputsAreReturnedByBothModes) {
  const std::vector<double> p{0.2, 0.5, 0.3};
  EXPECT_EQ(ensemble<double>(p, p, EnsembleMode::kAvg), p);
  EXPECT_EQ(ensemble<double>(p, p, EnsembleMode::kMax), p);
}

TEST(Ensemble, AverageWithFullWeightIsTheStructureModel) {
  const std::vector<double> s{0.6, 0.4}, t{0.3, 0.7};
  EXPECT_EQ(ensemble<double>(s, t, EnsembleMode::kAvg, 1.0), s);
  EXPECT_EQ(ensemble<double>(s, t, EnsembleMode::kAvg, 0.0), t);
}

TEST(Ensemble, MaxExample) {
  const std::vector<double> s{0.6, 0.4}, t{0.3, 0.7};
  const auto m = ensemble<double>(s, t, EnsembleMode::kMax);
  EXPECT_EQ(m, (std::vector<double>{0.6, 0.7}));
  EXPECT_EQ(std::max_element(m.begin(), m.end()) - m.begin(), 1);
}

TEST(Ensemble, RejectsMismatchAndBadWeight) {
  const std::vector<double> a{0.5, 0.5}, b{1.0};
  EXPECT_THROW(ensemble<double>(a, b, EnsembleMode::kAvg), EvalError);
  EXPECT_THROW(ensemble<double>(a, a, EnsembleMode::kAvg, 1.5), EvalError);
}

TEST(Ensemble, AverageArgmaxSurvivesCommonRescaling) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(7), t(7);
    for (auto& v : s) v = u(rng);
    for (auto& v : t) v = u(rng);
    const double c = 0.1 + 10 * u(rng), w = u(rng);
    auto scaled = [&](std::vector<double> v) {
      for (auto& x : v) x *= c;
      return v;
    };
    const auto a = ensemble<double>(s, t, EnsembleMode::kAvg, w);
    const auto b = ensemble<double>(scaled(s), scaled(t), EnsembleMode::kAvg, w);
    EXPECT_EQ(std::max_element(a.begin(), a.end()) - a.begin(), std::max_element(b.begin(), b.end()) - b.begin());
  }
}

TEST(RankQueries, ThreadedMatchesSequential) {
  const auto g = toy_graph();
  const auto queries = kgdata::make_queries(g, g.test());
  Scorer<double> score = [](std::span<const kgdata::Query> qs) {
    std::vector<std::vector<double>> out;
    for (const auto& q : qs) {
      std::vector<double> row(50);
      for (std::size_t e = 0; e < 50; ++e) row[e] = double((e * 7 + q.source.index() * 3 + q.relation.index()) % 11);
      out.push_back(row);
    }
    return out;
  };
  const auto a = rank_queries<double>(g, queries, score, 7, 1);
  const auto b = rank_queries<double>(g, queries, score, 7, 4);
  ASSERT_EQ(a.size(), queries.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].rank, b[i].rank);
}

TEST(DegreeBins, OneBinEqualsOverallHitsAtOne) {
  const auto g = toy_graph();
  const auto queries = kgdata::make_queries(g, g.test());
  std::vector<QueryResult> r;
  std::mt19937_64 rng(2);
  std::size_t hits = 0;
  for (const auto& q : queries) {
    r.push_back({q, 1 + rng() % 3});
    hits += r.back().rank == 1;
  }
  const std::vector<std::size_t> edges{1};
  const std::vector<TaggedResults> models{{"s", r}};
  const auto bins = degree_bins(models, g, edges);
  ASSERT_EQ(bins.size(), 2u);
  EXPECT_EQ(bins[0].queries, 0u);  // every toy entity has training edges
  EXPECT_EQ(bins[1].queries, queries.size());
  EXPECT_DOUBLE_EQ(bins[1].hits1[0], double(hits) / double(queries.size()));
}

TEST(DegreeBins, LabelsAndPartition) {
  const std::vector<std::size_t> edges{1, 6, 11};
  EXPECT_EQ(degree_bin_label(3, edges), "[1,6)");
  EXPECT_EQ(degree_bin_label(6, edges), "[6,11)");
  EXPECT_EQ(degree_bin_label(40, edges), "[11,inf)");
  EXPECT_EQ(degree_bin_label(0, edges), "[0,1)");
  const auto g = toy_graph();
  const auto queries = kgdata::make_queries(g, g.test());
  std::vector<QueryResult> r;
  for (const auto& q : queries) r.push_back({q, 1});
  const std::vector<TaggedResults> models{{"s", r}, {"t", r}};
  const std::vector<std::size_t> fine{1, 10, 12, 14};
  std::size_t total = 0;
  for (const auto& b : degree_bins(models, g, fine)) total += b.queries;
  EXPECT_EQ(total, queries.size());
  const auto csv = degree_bin_csv(models, g, fine);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "bin,queries,hits@1_s,hits@1_t");
  const std::vector<std::size_t> bad{0, 5};
  EXPECT_THROW(degree_bins(models, g, bad), EvalError);
}

TEST(Overlap, IdenticalAndDisjointCases) {
  std::vector<QueryResult> a{result(Side::kTail, 1, 0), result(Side::kTail, 3, 1)};
  EXPECT_EQ(overlap_report(a, a).only_a, 0u);
  EXPECT_EQ(overlap_report(a, a).only_b, 0u);
  EXPECT_EQ(overlap_report(a, a).both, 1u);
  std::vector<QueryResult> b{result(Side::kTail, 2, 0), result(Side::kTail, 1, 1)};
  const auto o = overlap_report(a, b);
  EXPECT_EQ(o.only_a, 1u);
  EXPECT_EQ(o.both, 0u);
  EXPECT_EQ(o.only_b, 1u);
  b[1].query.side = Side::kHead;
  EXPECT_THROW(overlap_report(a, b), EvalError);
}

TEST(Overlap, MatchesSetOracle) {
  const auto g = toy_graph();
  const auto queries = kgdata::make_queries(g, g.test());
  std::mt19937_64 rng(4);
  std::vector<QueryResult> a, b;
  std::set<std::size_t> sa, sb;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    a.push_back({queries[i], 1 + rng() % 2});
    b.push_back({queries[i], 1 + rng() % 2});
    if (a.back().rank == 1) sa.insert(i);
    if (b.back().rank == 1) sb.insert(i);
  }
  std::vector<std::size_t> both, only_a, only_b;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(both));
  std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(only_a));
  std::set_difference(sb.begin(), sb.end(), sa.begin(), sa.end(), std::back_inserter(only_b));
  const auto o = overlap_report(a, b);
  EXPECT_EQ(o.both, both.size());
  EXPECT_EQ(o.only_a, only_a.size());
  EXPECT_EQ(o.only_b, only_b.size());
  EXPECT_EQ(overlap_csv(o, "s", "t"), "only_s,both,only_t\n" + std::to_string(o.only_a) + "," +
                                         std::to_string(o.both) + "," + std::to_string(o.only_b) + "\n");
}

TEST(Reports, JsonAndTableCarryTheHeadlineNumbers) {
  const std::vector<QueryResult> r{result(Side::kTail, 1), result(Side::kHead, 4)};
  const auto m = aggregate(r);
  const auto json = metrics_json(m);
  for (const char* key : {"\"overall\"", "\"hits@1\"", "\"hits@3\"", "\"hits@10\"", "\"mrr\""})
    EXPECT_NE(json.find(key), std::string::npos) << key;
  EXPECT_NE(metrics_table(m, "nformer").find("MRR"), std::string::npos);
}
