// graph model, parser, Union-Set pool, labeling, and split protocols.
#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "mxlink/graph.hpp"
#include "mxlink/split.hpp"

using namespace mxlink;

namespace {

MultiplexGraph tiny_graph() {
  return parse_multiplex_edgelist("1 a b\n1 b c\n2 a b\n");
}

// Random l-layer graph over n nodes; every possible pair tossed per layer.
MultiplexGraph random_graph(int n, int l, double p, Rng& rng) {
  MultiplexGraph g;
  g.node_count = n;
  for (int i = 0; i < n; ++i) g.node_labels.push_back("n" + std::to_string(i));
  for (int m = 0; m < l; ++m) {
    std::vector<NodePair> edges;
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v)
        if (rng.uniform() < p) edges.emplace_back(u, v);
    g.layer_names.push_back("L" + std::to_string(m));
    g.layers.emplace_back(g.node_count, std::move(edges));
  }
  return g;
}

}  // namespace

TEST(Parser, BasicConstruction) {
  auto g = tiny_graph();
  EXPECT_EQ(g.node_count, 3);
  EXPECT_EQ(g.layer_count(), 2);
  EXPECT_EQ(g.layers[0].edge_count(), 2u);
  EXPECT_EQ(g.layers[1].edge_count(), 1u);
  EXPECT_EQ(g.node_labels[0], "a");
  EXPECT_TRUE(g.layers[0].has_edge(0, 1));
  EXPECT_TRUE(g.layers[0].has_edge(1, 2));
  EXPECT_FALSE(g.layers[1].has_edge(1, 2));
}

TEST(Parser, DropsSelfLoopsAndDuplicatesWithCount) {
  ParseStats stats;
  auto g = parse_multiplex_edgelist("1 a a\n1 a b\n1 b a\n2 a b\n",
                                    EdgeListFormat::layer_first, &stats);
  EXPECT_EQ(g.layers[0].edge_count(), 1u);
  EXPECT_EQ(stats.self_loops_dropped, 1);
  EXPECT_EQ(stats.duplicates_dropped, 1);
}

TEST(Parser, CommentsBlankLinesAndWeights) {
  auto g = parse_multiplex_edgelist(
      "# a comment\n\n1 a b 0.7\n2\tb\tc\t1\n# another\n2 a c\n");
  EXPECT_EQ(g.node_count, 3);
  EXPECT_EQ(g.layer_count(), 2);
  EXPECT_EQ(g.total_edges(), 3u);
}

TEST(Parser, MalformedLinesReportLineNumber) {
  try {
    parse_multiplex_edgelist("1 a b\n1 a\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_multiplex_edgelist("1 a b c d e\n2 a b\n"), DataError);
  EXPECT_THROW(parse_multiplex_edgelist("1 a b notanumber\n2 a b\n"),
               DataError);
}

TEST(Parser, RejectsFewerThanTwoLayers) {
  EXPECT_THROW(parse_multiplex_edgelist("1 a b\n1 b c\n"), DataError);
  EXPECT_THROW(parse_multiplex_edgelist(""), DataError);
}

TEST(Parser, RoundTripPreservesLabeledStructure) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_graph(8, 3, 0.4, rng);
    const std::string text1 = serialize_multiplex_edgelist(g);
    auto g2 = parse_multiplex_edgelist(text1);
    EXPECT_TRUE(same_labeled_graph(g, g2));
    // Canonical serialization: a byte-stable fixpoint of parse -> serialize.
    EXPECT_EQ(serialize_multiplex_edgelist(g2), text1);
  }
}

TEST(LayerGraph, AdjacencyMatchesEdges) {
  auto g = tiny_graph();
  for (const auto& layer : g.layers) {
    size_t degree_sum = 0;
    for (NodeId u = 0; u < g.node_count; ++u) {
      const auto& nbrs = layer.neighbors(u);
      EXPECT_TRUE(std::is_sorted(nbrs.begin(), nbrs.end()));
      EXPECT_TRUE(std::adjacent_find(nbrs.begin(), nbrs.end()) == nbrs.end());
      degree_sum += nbrs.size();
    }
    EXPECT_EQ(layer.edge_count(), degree_sum / 2);
  }
}

TEST(UnionPool, SmallUnionAndIdempotence) {
  auto g = parse_multiplex_edgelist("1 a b\n1 b c\n2 a b\n2 c d\n");
  auto pool = build_union_pool(g);
  EXPECT_EQ(pool.size(), 3u);
  EXPECT_TRUE(std::is_sorted(pool.pairs.begin(), pool.pairs.end()));

  auto g2 = parse_multiplex_edgelist("1 a b\n1 b c\n2 a b\n2 b c\n");
  EXPECT_EQ(build_union_pool(g2).size(), 2u);  // identical layers: union = k
}

TEST(UnionPool, MatchesBruteForceOnRandomGraphs) {
  Rng rng(11);
  for (int trial = 0; trial < 120; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(10));  // up to 12 nodes
    auto g = random_graph(n, 2 + static_cast<int>(rng.below(3)), 0.3, rng);
    auto pool = build_union_pool(g);
    // Oracle: scan all N(N-1)/2 pairs for any-layer membership.
    std::vector<NodePair> expected;
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v) {
        bool any = false;
        for (const auto& l : g.layers) any = any || l.has_edge(u, v);
        if (any) expected.emplace_back(u, v);
      }
    EXPECT_EQ(pool.pairs, expected);
    EXPECT_GE(max_edge_count(g.layer_count(), n),
              static_cast<int64_t>(pool.size()));
  }
}

TEST(MaxEdgeCount, FormulaAndOverflow) {
  EXPECT_EQ(max_edge_count(3, 29), 1218);
  EXPECT_EQ(max_edge_count(5, 61), 9150);
  EXPECT_EQ(max_edge_count(1, 2), 1);
  EXPECT_THROW(max_edge_count(0, 5), UsageError);
  EXPECT_THROW(max_edge_count(INT64_MAX, INT64_MAX), NumericError);
}

TEST(Labeling, MembershipAndOrder) {
  auto g = parse_multiplex_edgelist("1 a b\n1 b c\n2 a b\n2 c d\n");
  auto pool = build_union_pool(g);
  auto labeled = label_for_target(pool, g, 1);
  ASSERT_EQ(labeled.size(), 3u);
  EXPECT_EQ(labeled[0].label, 1);  // (a,b)
  EXPECT_EQ(labeled[1].label, 0);  // (b,c)
  EXPECT_EQ(labeled[2].label, 1);  // (c,d)
  for (size_t i = 0; i < labeled.size(); ++i)
    EXPECT_EQ(labeled[i].pair, pool.pairs[i]);
  EXPECT_THROW(label_for_target(pool, g, 2), UsageError);
}

TEST(Labeling, TargetEqualToUnionIsAllPositive) {
  auto g = parse_multiplex_edgelist("1 a b\n1 b c\n2 a b\n");
  auto pool = build_union_pool(g);
  auto labeled = label_for_target(pool, g, 0);  // layer 0 == union here
  for (const auto& e : labeled) EXPECT_EQ(e.label, 1);
}

TEST(Labeling, MatchesBruteForceMembership) {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_graph(7, 3, 0.35, rng);
    auto pool = build_union_pool(g);
    if (pool.size() == 0) continue;
    const int target = static_cast<int>(rng.below(3));
    auto labeled = label_for_target(pool, g, target);
    for (const auto& e : labeled) {
      const auto& edges = g.layers[static_cast<size_t>(target)].edges();
      const bool member =
          std::find(edges.begin(), edges.end(), e.pair) != edges.end();
      EXPECT_EQ(e.label, member ? 1 : 0);
    }
  }
}

// --- splits -----------------------------------------------------------------

namespace {

std::vector<LabeledExample> synthetic_examples(int n, int n_pos) {
  std::vector<LabeledExample> out;
  for (int i = 0; i < n; ++i)
    out.push_back({{static_cast<NodeId>(i), static_cast<NodeId>(i + n)},
                   i < n_pos ? 1 : 0,
                   0});
  return out;
}

std::multiset<std::pair<NodePair, int>> as_multiset(
    const std::vector<LabeledExample>& v) {
  std::multiset<std::pair<NodePair, int>> s;
  for (const auto& e : v) s.insert({e.pair, e.label});
  return s;
}

int count_pos(const std::vector<LabeledExample>& v) {
  int c = 0;
  for (const auto& e : v) c += e.label;
  return c;
}

}  // namespace

TEST(StratifiedSplit, RatioArithmetic) {
  auto b = stratified_split(synthetic_examples(100, 20), {0.70, 0.15, 0.15}, 42);
  EXPECT_EQ(b.train.size(), 70u);
  EXPECT_EQ(b.val.size(), 15u);
  EXPECT_EQ(b.test.size(), 15u);
  EXPECT_EQ(count_pos(b.train), 14);
  EXPECT_EQ(count_pos(b.val), 3);
  EXPECT_EQ(count_pos(b.test), 3);
  EXPECT_TRUE(b.held_out_nodes.empty());
}

TEST(StratifiedSplit, DeterministicAndSeedSensitive) {
  auto ex = synthetic_examples(60, 18);
  auto a = stratified_split(ex, {0.70, 0.15, 0.15}, 42);
  auto b = stratified_split(ex, {0.70, 0.15, 0.15}, 42);
  EXPECT_EQ(as_multiset(a.train), as_multiset(b.train));
  EXPECT_EQ(as_multiset(a.val), as_multiset(b.val));
  EXPECT_EQ(as_multiset(a.test), as_multiset(b.test));

  auto c = stratified_split(ex, {0.70, 0.15, 0.15}, 18);
  EXPECT_NE(as_multiset(a.train), as_multiset(c.train));
  EXPECT_EQ(count_pos(a.train), count_pos(c.train));
  EXPECT_EQ(count_pos(a.val), count_pos(c.val));
  EXPECT_EQ(count_pos(a.test), count_pos(c.test));
}

TEST(StratifiedSplit, ExactDisjointCover) {
  auto ex = synthetic_examples(83, 31);
  auto b = stratified_split(ex, {0.70, 0.15, 0.15}, 45);
  auto all = as_multiset(b.train);
  for (const auto& e : b.val) all.insert({e.pair, e.label});
  for (const auto& e : b.test) all.insert({e.pair, e.label});
  EXPECT_EQ(all, as_multiset(ex));
  // No duplicate pairs across splits.
  std::set<NodePair> uniq;
  for (const auto& e : ex) uniq.insert(e.pair);
  EXPECT_EQ(uniq.size(), ex.size());
}

TEST(StratifiedSplit, StratificationWithinOneExample) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 30 + static_cast<int>(rng.below(100));
    const int pos = 3 + static_cast<int>(rng.below(static_cast<uint64_t>(n - 6)));
    auto b = stratified_split(synthetic_examples(n, pos), {0.70, 0.15, 0.15},
                              rng.next());
    const double global = static_cast<double>(pos) / n;
    for (const auto* split : {&b.train, &b.val, &b.test}) {
      if (split->empty()) continue;
      const double expected = global * static_cast<double>(split->size());
      EXPECT_LE(std::fabs(count_pos(*split) - expected), 1.0 + 1e-9);
    }
  }
}

TEST(StratifiedSplit, Errors) {
  EXPECT_THROW(
      stratified_split(synthetic_examples(10, 2), {0.70, 0.15, 0.15}, 1),
      DataError);  // class with < 3 examples
  EXPECT_THROW(
      stratified_split(synthetic_examples(10, 0), {0.70, 0.15, 0.15}, 1),
      DataError);  // missing class
  EXPECT_THROW(
      stratified_split(synthetic_examples(10, 5), {0.5, 0.2, 0.2}, 1),
      UsageError);  // ratios don't sum to 1
}

TEST(InductiveSplit, HoldoutCountAndLeakageFreedom) {
  Rng rng(31);
  auto g = random_graph(10, 2, 0.6, rng);
  auto pool = build_union_pool(g);
  auto b = inductive_node_split(g, pool, 0, 0.2, 42);
  EXPECT_EQ(b.held_out_nodes.size(), 2u);
  std::set<NodeId> held(b.held_out_nodes.begin(), b.held_out_nodes.end());
  for (const auto& e : b.train) {
    EXPECT_FALSE(held.count(e.pair.first));
    EXPECT_FALSE(held.count(e.pair.second));
  }
  for (const auto& e : b.val) {
    EXPECT_FALSE(held.count(e.pair.first));
    EXPECT_FALSE(held.count(e.pair.second));
  }
  for (const auto& e : b.test)
    EXPECT_TRUE(held.count(e.pair.first) || held.count(e.pair.second));
  EXPECT_EQ(b.protocol, Protocol::inductive_node);
}

TEST(InductiveSplit, ExhaustiveScanOnVickersSizedGraph) {
  // 29 nodes, 3 layers, dense: the Vickers shape.
  Rng rng(63);
  auto g = random_graph(29, 3, 0.55, rng);
  auto pool = build_union_pool(g);
  auto b = inductive_node_split(g, pool, 1, 0.15, 42);
  EXPECT_EQ(b.held_out_nodes.size(),
            static_cast<size_t>(std::ceil(0.15 * 29)));
  std::set<NodeId> held(b.held_out_nodes.begin(), b.held_out_nodes.end());
  long touching = 0;
  for (const auto& e : b.train)
    touching += held.count(e.pair.first) + held.count(e.pair.second);
  EXPECT_EQ(touching, 0);
  // Cover: test + retained = full labeled pool.
  EXPECT_EQ(b.train.size() + b.val.size() + b.test.size(), pool.size());
}

TEST(InductiveSplit, PreconditionAndErrors) {
  Rng rng(77);
  auto g = random_graph(10, 2, 0.5, rng);
  auto pool = build_union_pool(g);
  EXPECT_THROW(inductive_node_split(g, pool, 0, 0.0, 1), UsageError);
  EXPECT_THROW(inductive_node_split(g, pool, 0, 0.5, 1), UsageError);
}

TEST(SplitJson, RoundTrip) {
  Rng rng(13);
  auto g = random_graph(12, 3, 0.4, rng);
  auto pool = build_union_pool(g);
  auto b = inductive_node_split(g, pool, 2, 0.2, 18);
  auto j = split_to_json(b);
  auto b2 = split_from_json(j);
  EXPECT_EQ(as_multiset(b.train), as_multiset(b2.train));
  EXPECT_EQ(as_multiset(b.val), as_multiset(b2.val));
  EXPECT_EQ(as_multiset(b.test), as_multiset(b2.test));
  EXPECT_EQ(b.held_out_nodes, b2.held_out_nodes);
  EXPECT_EQ(b.target_layer, b2.target_layer);
  EXPECT_EQ(b.seed, b2.seed);
}

TEST(GraphBinary, RoundTrip) {
  Rng rng(99);
  auto g = random_graph(15, 4, 0.3, rng);
  std::stringstream buf;
  write_graph_binary(g, buf);
  auto g2 = read_graph_binary(buf);
  EXPECT_EQ(g.node_count, g2.node_count);
  EXPECT_EQ(g.node_labels, g2.node_labels);
  EXPECT_EQ(g.layer_names, g2.layer_names);
  for (int m = 0; m < g.layer_count(); ++m)
    EXPECT_EQ(g.layers[static_cast<size_t>(m)].edges(),
              g2.layers[static_cast<size_t>(m)].edges());
}

TEST(GraphSummary, JsonShape) {
  auto g = tiny_graph();
  auto j = graph_summary_json(g);
  EXPECT_EQ(j["nodes"], 3);
  EXPECT_EQ(j["layers"].size(), 2u);
  EXPECT_EQ(j["layers"][0]["edges"], 2);
  EXPECT_EQ(j["union_size"], 2);
}
