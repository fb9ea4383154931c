#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dirlink/error.hpp"
#include "dirlink/graph.hpp"
#include "dirlink/io.hpp"
#include "oracles.hpp"

using namespace dirlink;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / ("dirlink_test_" + name);
  std::ofstream(p) << body;
  return p;
}

DirectedGraph ring3() { return DirectedGraph(3, {{0, 1}, {1, 2}, {2, 0}}); }

}  // namespace

TEST(EdgeList, DuplicatesCollapse) {
  DirectedGraph::BuildStats stats;
  const auto g = load_edge_list(write_temp("dup.txt", "0 1\n1 2\n0 1\n"), std::nullopt, &stats);
  EXPECT_EQ(g.num_nodes(), 3u);
  ASSERT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1}));
  EXPECT_EQ(g.edges()[1], (Edge{1, 2}));
  EXPECT_EQ(stats.duplicates, 1u);
}

TEST(EdgeList, SelfLoopsDropped) {
  DirectedGraph::BuildStats stats;
  const auto g = load_edge_list(write_temp("loop.txt", "0 0\n0 1\n"), std::nullopt, &stats);
  ASSERT_EQ(g.num_edges(), 1u);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1}));
  EXPECT_EQ(stats.self_loops, 1u);
}

TEST(EdgeList, CommentsAndBlankLinesSkipped) {
  const auto g = load_edge_list(write_temp("comments.txt", "# header\n\n0 1\n   \n1 0\n"));
  EXPECT_EQ(g.num_edges(), 2u);
}

TEST(EdgeList, MalformedLineReportsLineNumber) {
  try {
    load_edge_list(write_temp("bad.txt", "0 1\n1 x\n"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_edge_list(write_temp("neg.txt", "0 -1\n")), ParseError);
  EXPECT_THROW(load_edge_list(write_temp("three.txt", "0 1 2\n")), ParseError);
}

TEST(EdgeList, EmptyFileIsAnError) {
  EXPECT_THROW(load_edge_list(write_temp("empty.txt", "")), ParseError);
  EXPECT_THROW(load_edge_list("/nonexistent/dirlink/file.txt"), Error);
}

TEST(EdgeList, WriteThenReadRoundTrips) {
  const DirectedGraph g(5, oracle::random_edges(5, 0.4, 3));
  const fs::path p = fs::temp_directory_path() / "dirlink_test_roundtrip.txt";
  write_edge_list(p, g.edges());
  EXPECT_EQ(load_edge_list(p, 5), g);
}

TEST(Features, FileRoundTrip) {
  const Matrix x = oracle::random_matrix(4, 3, 11);
  const fs::path p = fs::temp_directory_path() / "dirlink_test_features.txt";
  write_features(p, x);
  EXPECT_EQ(load_features(p), x);
  EXPECT_THROW(load_features(write_temp("badfeat.txt", "2 2\n1 2\n3\n")), ParseError);
}

TEST(Graph, RejectsOutOfRangeEndpoints) { EXPECT_THROW(DirectedGraph(2, {{0, 2}}), DataError); }

TEST(Graph, DegreesOfRingWithAndWithoutSelfLoops) {
  const auto d = degrees(ring3(), false);
  EXPECT_EQ(d.out, (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(d.in, (std::vector<double>{1, 1, 1}));
  const auto d2 = degrees(ring3(), true);
  EXPECT_EQ(d2.out, (std::vector<double>{2, 2, 2}));
  EXPECT_EQ(d2.in, (std::vector<double>{2, 2, 2}));
}

TEST(Graph, DegreesOfStar) {
  const auto d = degrees(DirectedGraph(4, {{0, 1}, {0, 2}, {0, 3}}), false);
  EXPECT_EQ(d.out, (std::vector<double>{3, 0, 0, 0}));
  EXPECT_EQ(d.in, (std::vector<double>{0, 1, 1, 1}));
}

TEST(Normalize, SingleEdgeHandValues) {
  const auto a = normalize_sym(DirectedGraph(2, {{0, 1}}));
  EXPECT_NEAR(a.at(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(a.at(0, 0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(a.at(1, 1), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(a.at(1, 0), 0.0);
  EXPECT_EQ(a.nnz(), 3u);
}

TEST(Normalize, DirectedMatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto edges = oracle::random_edges(12, 0.2, seed);
    const DirectedGraph g(12, edges);
    for (double alpha : {0.0, 0.3, 1.0})
      for (double beta : {0.0, 0.7}) {
        const Matrix expect = oracle::dense_directed_norm(12, edges, alpha, beta);
        EXPECT_LE(oracle::max_abs_diff(normalize_directed(g, alpha, beta).to_dense(), expect), 1e-14);
      }
    EXPECT_LE(oracle::max_abs_diff(normalize_sym(g).to_dense(), oracle::dense_directed_norm(12, edges, .5, .5)),
              1e-14);
  }
}

TEST(BipartiteBlock, PlacesEntriesOffDiagonal) {
  const auto s = bipartite_block(CsrMatrix::from_dense(Matrix{{0, 1}, {0, 0}}));
  EXPECT_EQ(s.rows(), 4u);
  EXPECT_EQ(s.nnz(), 2u);
  EXPECT_EQ(s.at(0, 3), 1.0);
  EXPECT_EQ(s.at(3, 0), 1.0);
  EXPECT_THROW(bipartite_block(CsrMatrix::from_dense(Matrix(2, 3))), ShapeError);
}

TEST(BipartiteBlock, SymmetricNormalizationOfLiftEqualsLiftOfNormalization) {
  std::mt19937_64 rng(99);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    const auto g = DirectedGraph(n, oracle::random_edges(n, 0.15, rng()));
    const auto lhs = symmetric_normalize(bipartite_block(adjacency(g, true)));
    const auto rhs = bipartite_block(normalize_sym(g));
    worst = std::max(worst, oracle::max_abs_diff(lhs.to_dense(), rhs.to_dense()));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Spmm, MatchesDenseProducts) {
  const auto g = DirectedGraph(15, oracle::random_edges(15, 0.3, 5));
  const auto a = normalize_sym(g);
  const Matrix x = oracle::random_matrix(15, 4, 6);
  EXPECT_LE(oracle::max_abs_diff(spmm(a, x), oracle::dense_matmul(a.to_dense(), x)), 1e-14);
  EXPECT_LE(oracle::max_abs_diff(spmm_t(a, x), oracle::dense_matmul(oracle::dense_transpose(a.to_dense()), x)),
            1e-14);
  EXPECT_EQ(spmm_t(a, x), spmm(a.transposed(), x));
}

TEST(Spmm, IdentityAndRowSums) {
  const Matrix x = oracle::random_matrix(3, 2, 1);
  EXPECT_EQ(spmm(CsrMatrix::identity(3), x), x);
  const auto a = normalize_sym(ring3());
  const Matrix ones(3, 1, 1.0);
  const Matrix r = spmm(a, ones);
  const auto sums = oracle::row_sums(a.to_dense());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r(i, 0), sums[i], 1e-15);
  EXPECT_THROW(spmm(a, Matrix(4, 1)), ShapeError);
}

TEST(Csr, TripletsSumDuplicatesAndValidate) {
  const auto m = CsrMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {0, 1, 2.0}, {1, 0, 1.0}});
  EXPECT_EQ(m.nnz(), 2u);
  EXPECT_EQ(m.at(0, 1), 3.0);
  EXPECT_THROW(CsrMatrix(2, 2, {0, 1, 1}, {5}, {1.0}), ShapeError);
}

TEST(Components, RingAndTwoEdges) {
  EXPECT_TRUE(is_weakly_connected(ring3()));
  const DirectedGraph two(4, {{0, 1}, {2, 3}});
  EXPECT_EQ(count_components(weakly_connected_components(two)), 2u);
}

TEST(Components, MatchesBfsOracle) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 5 + seed;
    const auto edges = oracle::random_edges(n, 0.06, seed);
    const DirectedGraph g(n, edges);
    EXPECT_EQ(count_components(weakly_connected_components(g)), oracle::bfs_components(n, edges)) << seed;
  }
}

TEST(Preprocess, KeepsLargestComponent) {
  // Two triangles; the first gets an extra node hanging off it.
  const DirectedGraph g(7, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}, {2, 6}});
  const auto p = preprocess(g, std::nullopt);
  EXPECT_EQ(p.graph.num_nodes(), 4u);
  EXPECT_EQ(p.graph.num_edges(), 4u);
  EXPECT_EQ(p.original_id, (std::vector<NodeId>{0, 1, 2, 6}));
  EXPECT_EQ(oracle::bfs_components(4, {p.graph.edges().begin(), p.graph.edges().end()}), 1u);
}

TEST(Preprocess, ConnectedGraphUnchanged) {
  const auto g = DirectedGraph(20, oracle::random_connected_edges(20, 40, 2));
  EXPECT_EQ(preprocess(g, std::nullopt).graph, g);
}

TEST(Preprocess, IsolatedNodeRemovedAndFeaturesFollow) {
  const DirectedGraph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  Matrix x(6, 1);
  for (std::size_t i = 0; i < 6; ++i) x(i, 0) = static_cast<double>(i);
  const auto p = preprocess(g, x);
  EXPECT_EQ(p.graph.num_nodes(), 5u);
  ASSERT_TRUE(p.features);
  EXPECT_EQ(p.features->rows(), 5u);
  EXPECT_EQ((*p.features)(4, 0), 4.0);
}

TEST(Preprocess, EmptyGraphThrows) { EXPECT_THROW(preprocess(DirectedGraph(3, {}), std::nullopt), DataError); }

TEST(Stats, PercentDirected) {
  const auto s = graph_stats(DirectedGraph(3, {{0, 1}, {1, 0}, {1, 2}}));
  EXPECT_EQ(s.nodes, 3u);
  EXPECT_EQ(s.edges, 3u);
  EXPECT_DOUBLE_EQ(s.avg_degree, 2.0);
  EXPECT_NEAR(s.percent_directed, 100.0 / 3.0, 1e-12);
}
