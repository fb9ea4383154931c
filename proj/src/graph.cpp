#include "dirlink/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "dirlink/error.hpp"

namespace dirlink {

// ---------------------------------------------------------------- CsrMatrix

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                     std::vector<std::size_t> col_idx, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size())
    throw ShapeError("csr: row_ptr must have rows+1 entries spanning col_idx");
  if (values_.size() != col_idx_.size()) throw ShapeError("csr: values/col_idx length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_ptr_[r] > row_ptr_[r + 1]) throw ShapeError("csr: row_ptr not monotone");
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      if (col_idx_[k] >= cols_) throw ShapeError("csr: column index out of range");
      if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1])
        throw ShapeError("csr: column indices not strictly increasing in row " + std::to_string(r));
    }
  }
}

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> row_ptr(rows + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  col_idx.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (t.row >= rows || t.col >= cols) throw ShapeError("csr: triplet out of range");
    if (i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
      values.back() += t.value;
      continue;
    }
    col_idx.push_back(t.col);
    values.push_back(t.value);
    ++row_ptr[t.row + 1];
  }
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
  return {rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values)};
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  std::vector<std::size_t> row_ptr(n + 1);
  std::vector<std::size_t> col_idx(n);
  std::iota(row_ptr.begin(), row_ptr.end(), std::size_t{0});
  std::iota(col_idx.begin(), col_idx.end(), std::size_t{0});
  return {n, n, std::move(row_ptr), std::move(col_idx), std::vector<double>(n, 1.0)};
}

CsrMatrix CsrMatrix::from_dense(const Matrix& dense) {
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t c = 0; c < dense.cols(); ++c) {
      if (dense(r, c) != 0.0) {
        col_idx.push_back(c);
        values.push_back(dense(r, c));
      }
    }
    row_ptr.push_back(col_idx.size());
  }
  return {dense.rows(), dense.cols(), std::move(row_ptr), std::move(col_idx), std::move(values)};
}

double CsrMatrix::at(std::size_t r, std::size_t c) const {
  auto cols = row_cols(r);
  auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
}

CsrMatrix CsrMatrix::transposed() const {
  std::vector<std::size_t> row_ptr(cols_ + 1, 0);
  for (auto c : col_idx_) ++row_ptr[c + 1];
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
  std::vector<std::size_t> cursor(row_ptr.begin(), row_ptr.end() - 1);
  std::vector<std::size_t> col_idx(nnz());
  std::vector<double> values(nnz());
  // Rows are visited in increasing order, so each transposed row comes out sorted.
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      std::size_t dst = cursor[col_idx_[k]]++;
      col_idx[dst] = r;
      values[dst] = values_[k];
    }
  }
  return {cols_, rows_, std::move(row_ptr), std::move(col_idx), std::move(values)};
}

Matrix CsrMatrix::to_dense() const {
  Matrix out(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out(r, col_idx_[k]) = values_[k];
  return out;
}

CsrMatrix CsrMatrix::scaled(std::span<const double> left, std::span<const double> right) const {
  if (left.size() != rows_ || right.size() != cols_) throw ShapeError("csr scale: length mismatch");
  std::vector<double> values(values_.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      values[k] = left[r] * values_[k] * right[col_idx_[k]];
  return {rows_, cols_, row_ptr_, col_idx_, std::move(values)};
}

// ------------------------------------------------------------ DirectedGraph

namespace {

CsrMatrix pattern_from_sorted(std::size_t n, std::span<const Edge> edges) {
  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<std::size_t> col_idx;
  col_idx.reserve(edges.size());
  for (const auto& e : edges) {
    ++row_ptr[e.src + 1];
    col_idx.push_back(e.dst);
  }
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
  return {n, n, std::move(row_ptr), std::move(col_idx), std::vector<double>(edges.size(), 1.0)};
}

}  // namespace

DirectedGraph::DirectedGraph(std::size_t n, std::vector<Edge> edges, BuildStats* stats) : n_(n) {
  BuildStats local;
  std::vector<Edge> kept;
  kept.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) {
      throw DataError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                      ") outside node range [0," + std::to_string(n) + ")");
    }
    if (e.src == e.dst) {
      ++local.self_loops;
      continue;
    }
    kept.push_back(e);
  }
  std::sort(kept.begin(), kept.end());
  auto last = std::unique(kept.begin(), kept.end());
  local.duplicates = static_cast<std::size_t>(kept.end() - last);
  kept.erase(last, kept.end());
  edges_ = std::move(kept);
  out_ = pattern_from_sorted(n_, edges_);
  in_ = out_.transposed();
  if (stats) *stats = local;
}

bool DirectedGraph::has_edge(NodeId u, NodeId v) const {
  if (u >= n_ || v >= n_) return false;
  auto cols = out_.row_cols(u);
  return std::binary_search(cols.begin(), cols.end(), std::size_t{v});
}

// ----------------------------------------------------------- normalization

Degrees degrees(const DirectedGraph& g, bool add_self_loops) {
  const double extra = add_self_loops ? 1.0 : 0.0;
  Degrees d{std::vector<double>(g.num_nodes(), extra), std::vector<double>(g.num_nodes(), extra)};
  for (const auto& e : g.edges()) {
    d.out[e.src] += 1.0;
    d.in[e.dst] += 1.0;
  }
  return d;
}

CsrMatrix adjacency(const DirectedGraph& g, bool self_loops) {
  if (!self_loops) return g.csr_out();
  std::vector<CsrMatrix::Triplet> t;
  t.reserve(g.num_edges() + g.num_nodes());
  for (const auto& e : g.edges()) t.push_back({e.src, e.dst, 1.0});
  for (std::size_t i = 0; i < g.num_nodes(); ++i) t.push_back({i, i, 1.0});
  return CsrMatrix::from_triplets(g.num_nodes(), g.num_nodes(), std::move(t));
}

CsrMatrix normalize_directed(const DirectedGraph& g, double alpha, double beta) {
  const Degrees d = degrees(g, true);
  std::vector<double> left(d.out.size());
  std::vector<double> right(d.in.size());
  for (std::size_t i = 0; i < left.size(); ++i) {
    left[i] = std::pow(d.out[i], -beta);
    right[i] = std::pow(d.in[i], -alpha);
  }
  return adjacency(g, true).scaled(left, right);
}

CsrMatrix normalize_sym(const DirectedGraph& g) {
  const Degrees d = degrees(g, true);
  std::vector<double> left(d.out.size());
  std::vector<double> right(d.in.size());
  for (std::size_t i = 0; i < left.size(); ++i) {
    left[i] = 1.0 / std::sqrt(d.out[i]);
    right[i] = 1.0 / std::sqrt(d.in[i]);
  }
  return adjacency(g, true).scaled(left, right);
}

CsrMatrix symmetric_normalize(const CsrMatrix& m) {
  if (!m.square()) throw ShapeError("symmetric_normalize: matrix not square");
  std::vector<double> scale(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double deg = 0.0;
    for (double v : m.row_values(r)) deg += v;
    scale[r] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  return m.scaled(scale, scale);
}

CsrMatrix bipartite_block(const CsrMatrix& m) {
  if (!m.square()) {
    throw ShapeError("bipartite_block: expected square matrix, got " + std::to_string(m.rows()) +
                     "x" + std::to_string(m.cols()));
  }
  const std::size_t n = m.rows();
  const CsrMatrix mt = m.transposed();
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  col_idx.reserve(2 * m.nnz());
  values.reserve(2 * m.nnz());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = m.row_ptr()[r]; k < m.row_ptr()[r + 1]; ++k) {
      col_idx.push_back(n + m.col_idx()[k]);
      values.push_back(m.values()[k]);
    }
    row_ptr.push_back(col_idx.size());
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = mt.row_ptr()[r]; k < mt.row_ptr()[r + 1]; ++k) {
      col_idx.push_back(mt.col_idx()[k]);
      values.push_back(mt.values()[k]);
    }
    row_ptr.push_back(col_idx.size());
  }
  return {2 * n, 2 * n, std::move(row_ptr), std::move(col_idx), std::move(values)};
}

// -------------------------------------------------------------------- spmm

Matrix spmm(const CsrMatrix& m, const Matrix& x) {
  if (m.cols() != x.rows()) {
    throw ShapeError("spmm: " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " sparse times " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }
  const std::size_t d = x.cols();
  Matrix out(m.rows(), d);
  const auto row_ptr = m.row_ptr();
  const auto col_idx = m.col_idx();
  const auto values = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double* dst = out.data() + r * d;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const double v = values[k];
      const double* src = x.data() + col_idx[k] * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += v * src[j];
    }
  }
  return out;
}

Matrix spmm_t(const CsrMatrix& m, const Matrix& x) {
  if (m.rows() != x.rows()) {
    throw ShapeError("spmm_t: transpose of " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + " times " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()));
  }
  const std::size_t d = x.cols();
  Matrix out(m.cols(), d);
  const auto row_ptr = m.row_ptr();
  const auto col_idx = m.col_idx();
  const auto values = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* src = x.data() + r * d;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const double v = values[k];
      double* dst = out.data() + col_idx[k] * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += v * src[j];
    }
  }
  return out;
}

// -------------------------------------------------------------- components

namespace {

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (a > b) std::swap(a, b);
    parent[b] = a;
    return true;
  }

  std::vector<std::size_t> parent;
};

}  // namespace

std::vector<std::size_t> weakly_connected_components(const DirectedGraph& g) {
  DisjointSets sets(g.num_nodes());
  for (const auto& e : g.edges()) sets.unite(e.src, e.dst);
  std::vector<std::size_t> label(g.num_nodes());
  std::vector<std::size_t> root_label(g.num_nodes(), static_cast<std::size_t>(-1));
  std::size_t next = 0;
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    std::size_t root = sets.find(u);
    if (root_label[root] == static_cast<std::size_t>(-1)) root_label[root] = next++;
    label[u] = root_label[root];
  }
  return label;
}

std::size_t count_components(std::span<const std::size_t> labels) {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

bool is_weakly_connected(const DirectedGraph& g) {
  return g.num_nodes() > 0 && count_components(weakly_connected_components(g)) == 1;
}

Preprocessed preprocess(const DirectedGraph& g, const std::optional<FeatureMatrix>& features) {
  if (features && features->rows() != g.num_nodes()) {
    throw DataError("feature matrix has " + std::to_string(features->rows()) + " rows for " +
                    std::to_string(g.num_nodes()) + " nodes");
  }
  const auto labels = weakly_connected_components(g);
  std::vector<std::size_t> sizes(count_components(labels), 0);
  for (auto l : labels) ++sizes[l];
  // Components are numbered by smallest member, so max_element breaks ties toward it.
  const auto best = static_cast<std::size_t>(
      std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  if (sizes.empty() || sizes[best] < 2) throw DataError("graph has no edges after filtering");

  Preprocessed out;
  std::vector<NodeId> new_id(g.num_nodes(), static_cast<NodeId>(-1));
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    if (labels[u] == best) {
      new_id[u] = static_cast<NodeId>(out.original_id.size());
      out.original_id.push_back(static_cast<NodeId>(u));
    }
  }
  std::vector<Edge> edges;
  for (const auto& e : g.edges())
    if (labels[e.src] == best) edges.push_back({new_id[e.src], new_id[e.dst]});
  out.graph = DirectedGraph(out.original_id.size(), std::move(edges));
  if (features) {
    FeatureMatrix f(out.original_id.size(), features->cols());
    for (std::size_t i = 0; i < out.original_id.size(); ++i) {
      auto src = features->row(out.original_id[i]);
      std::copy(src.begin(), src.end(), f.row(i).begin());
    }
    out.features = std::move(f);
  }
  return out;
}

GraphStats graph_stats(const DirectedGraph& g) {
  GraphStats s;
  s.nodes = g.num_nodes();
  s.edges = g.num_edges();
  if (s.nodes) s.avg_degree = 2.0 * static_cast<double>(s.edges) / static_cast<double>(s.nodes);
  std::size_t one_way = 0;
  for (const auto& e : g.edges())
    if (!g.has_edge(e.dst, e.src)) ++one_way;
  if (s.edges) s.percent_directed = 100.0 * static_cast<double>(one_way) / static_cast<double>(s.edges);
  return s;
}

DirectedGraph generate_directed_sbm(std::size_t n, std::size_t blocks, double p_in, double p_fwd,
                                    double p_out, std::uint64_t seed) {
  if (blocks == 0 || blocks > n) throw DataError("sbm: need 1 <= blocks <= n");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto block = [&](std::size_t u) { return u * blocks / n; };
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      const std::size_t bu = block(u);
      const std::size_t bv = block(v);
      double p = p_out;
      if (bu == bv) p = p_in;
      else if (bv == (bu + 1) % blocks) p = p_fwd;
      if (unit(rng) < p) edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
    }
  }
  return DirectedGraph(n, std::move(edges));
}

}  // namespace dirlink
