#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dirlink/dense.hpp"

namespace dirlink {

using NodeId = std::uint32_t;

/// Ordered pair (src -> dst). Ordering is lexicographic.
struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Compressed sparse row matrix.
///
/// Invariants (checked on construction): row_ptr has rows+1 monotone entries,
/// col_idx values lie in [0, cols) and are strictly increasing within a row.
class CsrMatrix {
 public:
  struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
  };

  CsrMatrix() : row_ptr_(1, 0) {}
  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
            std::vector<std::size_t> col_idx, std::vector<double> values);

  /// Builds from unordered triplets; duplicate coordinates are summed.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static CsrMatrix identity(std::size_t n);
  static CsrMatrix from_dense(const Matrix& dense);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return col_idx_.size(); }
  bool square() const noexcept { return rows_ == cols_; }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  /// Stored value at (r, c), or 0 when the entry is structurally absent.
  double at(std::size_t r, std::size_t c) const;
  CsrMatrix transposed() const;
  Matrix to_dense() const;
  /// diag(left) * this * diag(right).
  CsrMatrix scaled(std::span<const double> left, std::span<const double> right) const;

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

/// Simple directed graph on nodes [0, n): no duplicate edges, no self-loops.
/// Immutable after construction.
class DirectedGraph {
 public:
  struct BuildStats {
    std::size_t duplicates = 0;
    std::size_t self_loops = 0;
  };

  DirectedGraph() = default;
  /// Sorts and deduplicates `edges`, dropping self-loops. Throws DataError on
  /// endpoints outside [0, n).
  DirectedGraph(std::size_t n, std::vector<Edge> edges, BuildStats* stats = nullptr);

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  /// Edges in lexicographic order (matches the CSR row order).
  std::span<const Edge> edges() const noexcept { return edges_; }

  /// Pattern of A (row = source), unit values.
  const CsrMatrix& csr_out() const noexcept { return out_; }
  /// Pattern of A^T (row = target), unit values.
  const CsrMatrix& csr_in() const noexcept { return in_; }

  bool has_edge(NodeId u, NodeId v) const;
  std::span<const std::size_t> out_neighbors(NodeId u) const { return out_.row_cols(u); }
  std::span<const std::size_t> in_neighbors(NodeId v) const { return in_.row_cols(v); }
  std::size_t out_degree(NodeId u) const { return out_.row_cols(u).size(); }
  std::size_t in_degree(NodeId v) const { return in_.row_cols(v).size(); }

  friend bool operator==(const DirectedGraph& a, const DirectedGraph& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  CsrMatrix out_;
  CsrMatrix in_;
};

struct Degrees {
  std::vector<double> out;
  std::vector<double> in;
};

/// Out/in degrees; with `add_self_loops` every node gains one of each.
Degrees degrees(const DirectedGraph& g, bool add_self_loops);

/// A, or A + I when `self_loops` is set, with unit weights.
CsrMatrix adjacency(const DirectedGraph& g, bool self_loops);

/// D_out^{-1/2} (A + I) D_in^{-1/2}, degrees taken from A + I.
CsrMatrix normalize_sym(const DirectedGraph& g);

/// D_out^{-beta} (A + I) D_in^{-alpha}, degrees taken from A + I.
CsrMatrix normalize_directed(const DirectedGraph& g, double alpha, double beta);

/// D^{-1/2} M D^{-1/2} with D the row sums of the symmetric matrix M.
CsrMatrix symmetric_normalize(const CsrMatrix& m);

/// [[0, M], [M^T, 0]] for square M. Throws ShapeError otherwise.
CsrMatrix bipartite_block(const CsrMatrix& m);

/// M * X.
Matrix spmm(const CsrMatrix& m, const Matrix& x);
/// M^T * X without materializing the transpose.
Matrix spmm_t(const CsrMatrix& m, const Matrix& x);

/// Labels in [0, count) over the underlying undirected graph, numbered in
/// order of the smallest node of each component.
std::vector<std::size_t> weakly_connected_components(const DirectedGraph& g);
std::size_t count_components(std::span<const std::size_t> labels);
bool is_weakly_connected(const DirectedGraph& g);

struct Preprocessed {
  DirectedGraph graph;
  std::optional<FeatureMatrix> features;
  /// original_id[new] = node id in the input graph.
  std::vector<NodeId> original_id;
};

/// Keeps the largest weakly connected component (ties: the one containing the
/// smallest node id), drops isolated nodes and reindexes densely while keeping
/// the relative order of surviving nodes. Feature rows follow their nodes.
Preprocessed preprocess(const DirectedGraph& g, const std::optional<FeatureMatrix>& features);

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double avg_degree = 0.0;        // 2m / n
  double percent_directed = 0.0;  // 100 * #{(u,v): (v,u) not in E} / m
};

GraphStats graph_stats(const DirectedGraph& g);

/// Directed stochastic block model used for the bundled synthetic fixture.
/// Nodes are split into `blocks` equal groups. An edge u->v is drawn with
/// probability p_fwd when block(v) == block(u)+1 (cyclically), p_in inside a
/// block and p_out otherwise. Connectivity is not enforced.
DirectedGraph generate_directed_sbm(std::size_t n, std::size_t blocks, double p_in, double p_fwd,
                                    double p_out, std::uint64_t seed);

}  // namespace dirlink
