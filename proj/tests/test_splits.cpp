#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "dirlink/error.hpp"
#include "dirlink/splits.hpp"
#include "oracles.hpp"

using namespace dirlink;

namespace {

std::vector<Edge> as_vector(std::span<const Edge> s) { return {s.begin(), s.end()}; }

DirectedGraph random_connected(std::size_t n, std::size_t m, std::uint64_t seed) {
  return DirectedGraph(n, oracle::random_connected_edges(n, m, seed));
}

}  // namespace

TEST(HoldoutCount, FloorRule) {
  EXPECT_EQ(holdout_count(500, 0.15), 75u);
  EXPECT_EQ(holdout_count(500, 0.05), 25u);
  EXPECT_EQ(holdout_count(3, 0.15), 0u);
  EXPECT_EQ(holdout_count(2125, 0.15), 318u);
}

TEST(Split, TinyRingKeepsEverythingInTraining) {
  const DirectedGraph ring(3, {{0, 1}, {1, 2}, {2, 0}});
  const auto b = split_edges(ring, 0);
  EXPECT_EQ(b.train_graph().num_edges(), 3u);
  EXPECT_EQ(b.held_out_size(Holdout::test_pos), 0u);
  EXPECT_EQ(b.held_out_size(Holdout::val_pos), 0u);
  EXPECT_TRUE(audit_split(ring, b).empty());
}

TEST(Split, RandomGraphProportionsAndConnectivity) {
  const auto g = random_connected(100, 500, 17);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto b = split_edges(g, seed);
    EXPECT_EQ(b.held_out_size(Holdout::test_pos), 75u);
    EXPECT_EQ(b.held_out_size(Holdout::val_pos), 25u);
    EXPECT_EQ(b.held_out_size(Holdout::test_neg), 75u);
    EXPECT_EQ(b.held_out_size(Holdout::val_neg), 25u);
    EXPECT_EQ(b.train_graph().num_edges(), 400u);
    const auto train = as_vector(b.train_pos());
    EXPECT_EQ(oracle::bfs_components(100, train), 1u);
    EXPECT_TRUE(audit_split(g, b).empty());
  }
}

TEST(Split, PartsPartitionTheEdgeSet) {
  const auto g = random_connected(60, 300, 5);
  const auto b = split_edges(g, 9);
  std::set<Edge> all;
  for (auto part : {b.train_pos(), b.held_out(Holdout::val_pos), b.held_out(Holdout::test_pos)})
    for (const auto& e : part) EXPECT_TRUE(all.insert(e).second);
  EXPECT_EQ(all, std::set<Edge>(g.edges().begin(), g.edges().end()));
}

TEST(Split, NegativesAvoidFullGraph) {
  const auto g = random_connected(60, 300, 5);
  const auto b = split_edges(g, 4);
  std::set<Edge> negs;
  for (auto h : {Holdout::val_neg, Holdout::test_neg})
    for (const auto& e : b.held_out(h)) {
      EXPECT_NE(e.src, e.dst);
      EXPECT_FALSE(g.has_edge(e.src, e.dst));
      EXPECT_TRUE(negs.insert(e).second);
    }
}

TEST(Split, DeterministicPerSeed) {
  const auto g = random_connected(80, 320, 1);
  EXPECT_EQ(split_edges(g, 3), split_edges(g, 3));
  EXPECT_FALSE(split_edges(g, 3) == split_edges(g, 4));
}

TEST(Split, DisconnectedInputRejected) {
  EXPECT_THROW(split_edges(DirectedGraph(4, {{0, 1}, {2, 3}}), 0), DataError);
}

TEST(Split, TreeCannotLoseEdges) {
  // A spanning tree has no removable edges but asks for 15% test.
  std::vector<Edge> path;
  for (NodeId i = 0; i + 1 < 40; ++i) path.push_back({i, i + 1});
  try {
    split_edges(DirectedGraph(40, path), 0);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("only 0"), std::string::npos) << e.what();
  }
}

TEST(Split, SaveLoadRoundTrip) {
  const auto g = random_connected(50, 200, 8);
  const auto b = split_edges(g, 2);
  const auto dir = std::filesystem::temp_directory_path() / "dirlink_test_split";
  std::filesystem::remove_all(dir);
  save_split(dir, b);
  EXPECT_EQ(load_split(dir), b);
}

TEST(Split, AuditDetectsTampering) {
  const auto g = random_connected(50, 200, 8);
  const auto b = split_edges(g, 2);
  auto neg = as_vector(b.held_out(Holdout::test_neg));
  neg[0] = g.edges()[0];
  const SplitBundle bad(b.train_graph(), as_vector(b.held_out(Holdout::val_pos)),
                        as_vector(b.held_out(Holdout::val_neg)), as_vector(b.held_out(Holdout::test_pos)), neg,
                        b.seed());
  EXPECT_FALSE(audit_split(g, bad).empty());
}

TEST(Probe, ReportsEveryHeldOutAccess) {
  const auto g = random_connected(30, 90, 3);
  const auto b = split_edges(g, 0);
  std::vector<Holdout> seen;
  b.set_access_probe([&](Holdout h) { seen.push_back(h); });
  (void)b.held_out(Holdout::test_pos);
  (void)b.train_pos();
  EXPECT_EQ(seen, (std::vector<Holdout>{Holdout::test_pos}));
  b.set_access_probe({});
}

TEST(EvalNegatives, ForcedSinglePair) {
  std::vector<Edge> edges;
  for (NodeId u = 0; u < 4; ++u)
    for (NodeId v = 0; v < 4; ++v)
      if (u != v && !(u == 2 && v == 1)) edges.push_back({u, v});
  const DirectedGraph g(4, edges);
  EXPECT_EQ(sample_eval_negatives(g, 1, 0), (std::vector<Edge>{{2, 1}}));
  EXPECT_THROW(sample_eval_negatives(g, 2, 0), DataError);
}

TEST(EvalNegatives, NoOverlapAndDeterministic) {
  const auto edges = oracle::random_edges(50, 0.1, 12);
  const DirectedGraph g(50, edges);
  const std::set<Edge> truth(edges.begin(), edges.end());
  const auto a = sample_eval_negatives(g, 100, 7);
  ASSERT_EQ(a.size(), 100u);
  for (const auto& e : a) {
    EXPECT_EQ(truth.count(e), 0u);
    EXPECT_NE(e.src, e.dst);
  }
  EXPECT_EQ(std::set<Edge>(a.begin(), a.end()).size(), 100u);
  EXPECT_EQ(a, sample_eval_negatives(g, 100, 7));
}

TEST(TrainNegatives, HeldOutPositiveIsSampleable) {
  // Full graph has (2,0), which was held out, so the training graph lacks it.
  const DirectedGraph train(3, {{0, 1}, {1, 2}});
  const auto all = sample_train_negatives(train, 4, 0, NegativeStrategy::per_run, 0);
  EXPECT_NE(std::find(all.begin(), all.end(), Edge{2, 0}), all.end());
}

TEST(TrainNegatives, AvoidTrainingEdges) {
  const auto g = DirectedGraph(40, oracle::random_edges(40, 0.1, 2));
  for (const auto& e : sample_train_negatives(g, 200, 5, NegativeStrategy::per_epoch, 3)) {
    EXPECT_FALSE(g.has_edge(e.src, e.dst));
    EXPECT_NE(e.src, e.dst);
  }
}

TEST(TrainNegatives, PerRunFixedPerEpochResampled) {
  const auto g = DirectedGraph(40, oracle::random_edges(40, 0.1, 2));
  EXPECT_EQ(sample_train_negatives(g, 50, 1, NegativeStrategy::per_run, 0),
            sample_train_negatives(g, 50, 1, NegativeStrategy::per_run, 9));
  EXPECT_NE(sample_train_negatives(g, 50, 1, NegativeStrategy::per_epoch, 0),
            sample_train_negatives(g, 50, 1, NegativeStrategy::per_epoch, 1));
  EXPECT_EQ(sample_train_negatives(g, 50, 1, NegativeStrategy::per_epoch, 4),
            sample_train_negatives(g, 50, 1, NegativeStrategy::per_epoch, 4));
}

TEST(FeatureInit, DegreesOnRing) {
  const DirectedGraph ring(3, {{0, 1}, {1, 2}, {2, 0}});
  const auto x = init_features({FeatureMode::degrees, 0, 0}, ring, std::nullopt);
  EXPECT_EQ(x, (Matrix{{1, 1}, {1, 1}, {1, 1}}));
}

TEST(FeatureInit, RandomIsSeededAndCentered) {
  const DirectedGraph g(4, {{0, 1}, {1, 2}, {2, 3}});
  const auto a = init_features({FeatureMode::random, 64, 5}, g, std::nullopt);
  EXPECT_EQ(a.rows(), 4u);
  EXPECT_EQ(a.cols(), 64u);
  EXPECT_EQ(a, init_features({FeatureMode::random, 64, 5}, g, std::nullopt));
  double mean = 0;
  for (double v : a.values()) mean += v;
  mean /= static_cast<double>(a.size());
  EXPECT_LE(std::abs(mean), 3.0 / std::sqrt(256.0));
}

TEST(FeatureInit, OriginalPassThroughAndErrors) {
  const DirectedGraph g(2, {{0, 1}});
  const Matrix x{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(init_features({FeatureMode::original, 0, 0}, g, x), x);
  EXPECT_THROW(init_features({FeatureMode::original, 0, 0}, g, std::nullopt), DataError);
  EXPECT_THROW(init_features({FeatureMode::original, 0, 0}, g, Matrix(3, 1)), DataError);
}
