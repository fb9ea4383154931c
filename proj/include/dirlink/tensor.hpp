#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dirlink/dense.hpp"
#include "dirlink/graph.hpp"

namespace dirlink {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  /// Accumulated gradient; a zero matrix when backward never reached this node.
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const;
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class OpKind {
  constant,
  parameter,
  matmul,
  add,
  sub,
  hadamard,
  concat_cols,
  concat_rows,
  slice_rows,
  relu,
  sigmoid,
  gather_rows,
  sum,
  mean,
  scale,
  scale_const,
  add_const,
  add_bias,
  row_sum,
  spmm,
  spmm_t,
  bce_with_logits,
  ce_pairwise,
};

/// Append-only record of operations for reverse-mode differentiation.
///
/// Node ids are insertion order, which is a topological order; backward()
/// walks the records in reverse exactly once. A tape is single-threaded.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  /// Records `value` by reference; it must outlive the tape.
  Tensor constant_view(const Matrix& value);
  Tensor parameter(Matrix value);

  /// Propagates d(loss)/d(node) to every node. `loss` must be 1x1.
  /// Throws TrainingError when called a second time without reset_gradients().
  void backward(Tensor loss);
  void reset_gradients();

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind op(std::size_t id) const { return nodes_.at(id).op; }
  std::span<const std::size_t> inputs(std::size_t id) const { return nodes_.at(id).inputs; }

  // Used by the operator implementations.
  Tensor record(OpKind op, std::vector<std::size_t> inputs, Matrix value, BackwardFn fn);
  const Matrix& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Matrix& grad(std::size_t id) const;
  /// Gradient accumulator of `id`, allocated as zeros on first use.
  Matrix& grad_buffer(std::size_t id);

 private:
  struct Node {
    OpKind op;
    std::vector<std::size_t> inputs;
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Differentiable operators. All operands must live on the same tape.

Tensor matmul(Tensor a, Tensor b);
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor hadamard(Tensor a, Tensor b);
Tensor concat_cols(Tensor a, Tensor b);
Tensor concat_rows(Tensor a, Tensor b);
/// Rows [begin, end).
Tensor slice_rows(Tensor t, std::size_t begin, std::size_t end);
Tensor relu(Tensor t);
/// Uses the sign-split form so no intermediate overflows.
Tensor sigmoid(Tensor t);
Tensor gather_rows(Tensor t, std::span<const NodeId> rows);
/// Sum of all entries, 1x1.
Tensor sum(Tensor t);
Tensor mean(Tensor t);
/// t * s for a 1x1 tensor s.
Tensor scale(Tensor t, Tensor s);
Tensor scale(Tensor t, double s);
Tensor add_scalar(Tensor t, double s);
/// Adds the 1 x cols row vector `bias` to every row of x.
Tensor add_bias(Tensor x, Tensor bias);
/// Per-row sum, rows x 1.
Tensor row_sum(Tensor t);
/// M * X for a constant sparse M; gradient M^T * upstream. `m` must outlive the tape.
Tensor spmm_const(const CsrMatrix& m, Tensor x);
/// M^T * X for a constant sparse M; gradient M * upstream.
Tensor spmm_t_const(const CsrMatrix& m, Tensor x);
/// As spmm_const, but the tape keeps `m` alive.
Tensor spmm_const(std::shared_ptr<const CsrMatrix> m, Tensor x);

/// Mean binary cross-entropy on logits (one column); labels must be 0 or 1.
/// Throws TrainingError if a logit is not finite.
Tensor bce_with_logits(Tensor logits, std::span<const int> labels);
/// Mean two-class softmax cross-entropy on a (P x 2) logit matrix.
Tensor ce_pairwise(Tensor logits, std::span<const int> classes);

/// Elementwise logistic function without overflow.
double stable_sigmoid(double z) noexcept;

}  // namespace dirlink
