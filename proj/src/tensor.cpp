#include "dirlink/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "dirlink/error.hpp"

namespace dirlink {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> view(const Matrix& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
Eigen::Map<RowMajor> view(Matrix& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Tape& same_tape(Tensor a, Tensor b, const char* op) {
  if (!a.valid() || !b.valid()) throw ShapeError(std::string(op) + ": invalid tensor");
  if (&a.tape() != &b.tape()) throw ShapeError(std::string(op) + ": operands on different tapes");
  return a.tape();
}

Tape& tape_of(Tensor t, const char* op) {
  if (!t.valid()) throw ShapeError(std::string(op) + ": invalid tensor");
  return t.tape();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) throw ShapeError(std::string(op) + ": " + shape(a) + " vs " + shape(b));
}

void accumulate(Matrix& dst, const Matrix& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

double stable_sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ------------------------------------------------------------------ Tensor

const Matrix& Tensor::value() const { return tape_->value(id_); }
const Matrix& Tensor::grad() const { return tape_->grad(id_); }
bool Tensor::requires_grad() const { return tape_->requires_grad(id_); }
Tape& Tensor::tape() const { return *tape_; }

// -------------------------------------------------------------------- Tape

Tensor Tape::record(OpKind op, std::vector<std::size_t> inputs, Matrix value, BackwardFn fn) {
  bool needs = false;
  for (auto i : inputs) needs = needs || nodes_[i].requires_grad;
  Node node{op, std::move(inputs), std::move(value), nullptr, {}, needs, std::move(fn)};
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Tensor Tape::constant(Matrix value) {
  nodes_.push_back(Node{OpKind::constant, {}, std::move(value), nullptr, {}, false, {}});
  return {this, nodes_.size() - 1};
}

Tensor Tape::constant_view(const Matrix& value) {
  nodes_.push_back(Node{OpKind::constant, {}, {}, &value, {}, false, {}});
  return {this, nodes_.size() - 1};
}

Tensor Tape::parameter(Matrix value) {
  nodes_.push_back(Node{OpKind::parameter, {}, std::move(value), nullptr, {}, true, {}});
  return {this, nodes_.size() - 1};
}

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.value;
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.empty() && !value(id).empty()) {
    // Unreached node: expose zeros of the right shape.
    auto& self = const_cast<Node&>(n);
    self.grad = Matrix(value(id).rows(), value(id).cols());
  }
  return n.grad;
}

Matrix& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Matrix(value(id).rows(), value(id).cols());
  return n.grad;
}

void Tape::backward(Tensor loss) {
  if (backward_done_) throw TrainingError("backward called twice without reset_gradients()");
  if (&loss.tape() != this) throw TrainingError("backward: loss belongs to another tape");
  const Matrix& v = value(loss.id());
  if (v.rows() != 1 || v.cols() != 1)
    throw ShapeError("backward: loss must be 1x1, got " + shape(v));
  backward_done_ = true;
  grad_buffer(loss.id())(0, 0) = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].requires_grad) grad_buffer(i);
}

void Tape::reset_gradients() {
  for (auto& n : nodes_) n.grad = Matrix();
  backward_done_ = false;
}

// --------------------------------------------------------------- operators

Tensor matmul(Tensor a, Tensor b) {
  Tape& tape = same_tape(a, b, "matmul");
  Matrix out = matmul(a.value(), b.value());
  const auto ia = a.id();
  const auto ib = b.id();
  return tape.record(OpKind::matmul, {ia, ib}, std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) view(t.grad_buffer(ia)).noalias() += view(g) * view(t.value(ib)).transpose();
    if (t.requires_grad(ib)) view(t.grad_buffer(ib)).noalias() += view(t.value(ia)).transpose() * view(g);
  });
}

Tensor add(Tensor a, Tensor b) {
  Tape& tape = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  accumulate(out, b.value());
  const auto ia = a.id();
  const auto ib = b.id();
  return tape.record(OpKind::add, {ia, ib}, std::move(out), [ia, ib](Tape& t, std::size_t self) {
    if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), t.grad(self));
    if (t.requires_grad(ib)) accumulate(t.grad_buffer(ib), t.grad(self));
  });
}

Tensor sub(Tensor a, Tensor b) {
  Tape& tape = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.value().data()[i];
  const auto ia = a.id();
  const auto ib = b.id();
  return tape.record(OpKind::sub, {ia, ib}, std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
    if (t.requires_grad(ib)) {
      Matrix& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] -= g.data()[i];
    }
  });
}

Tensor hadamard(Tensor a, Tensor b) {
  Tape& tape = same_tape(a, b, "hadamard");
  require_same_shape(a.value(), b.value(), "hadamard");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
  const auto ia = a.id();
  const auto ib = b.id();
  return tape.record(OpKind::hadamard, {ia, ib}, std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Matrix& ga = t.grad_buffer(ia);
      const Matrix& vb = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * vb.data()[i];
    }
    if (t.requires_grad(ib)) {
      Matrix& gb = t.grad_buffer(ib);
      const Matrix& va = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * va.data()[i];
    }
  });
}

Tensor concat_cols(Tensor a, Tensor b) {
  Tape& tape = same_tape(a, b, "concat_cols");
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  if (va.rows() != vb.rows()) throw ShapeError("concat_cols: " + shape(va) + " vs " + shape(vb));
  const std::size_t ca = va.cols();
  const std::size_t cb = vb.cols();
  Matrix out(va.rows(), ca + cb);
  for (std::size_t r = 0; r < va.rows(); ++r) {
    std::copy(va.row(r).begin(), va.row(r).end(), out.row(r).begin());
    std::copy(vb.row(r).begin(), vb.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(ca));
  }
  const auto ia = a.id();
  const auto ib = b.id();
  return tape.record(OpKind::concat_cols, {ia, ib}, std::move(out),
                     [ia, ib, ca, cb](Tape& t, std::size_t self) {
                       const Matrix& g = t.grad(self);
                       for (std::size_t r = 0; r < g.rows(); ++r) {
                         if (t.requires_grad(ia)) {
                           auto dst = t.grad_buffer(ia).row(r);
                           for (std::size_t c = 0; c < ca; ++c) dst[c] += g(r, c);
                         }
                         if (t.requires_grad(ib)) {
                           auto dst = t.grad_buffer(ib).row(r);
                           for (std::size_t c = 0; c < cb; ++c) dst[c] += g(r, ca + c);
                         }
                       }
                     });
}

Tensor concat_rows(Tensor a, Tensor b) {
  Tape& tape = same_tape(a, b, "concat_rows");
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  if (va.cols() != vb.cols()) throw ShapeError("concat_rows: " + shape(va) + " vs " + shape(vb));
  std::vector<double> data(va.values());
  data.insert(data.end(), vb.values().begin(), vb.values().end());
  Matrix out(va.rows() + vb.rows(), va.cols(), std::move(data));
  const auto ia = a.id();
  const auto ib = b.id();
  const std::size_t split = va.size();
  return tape.record(OpKind::concat_rows, {ia, ib}, std::move(out),
                     [ia, ib, split](Tape& t, std::size_t self) {
                       const Matrix& g = t.grad(self);
                       if (t.requires_grad(ia)) {
                         Matrix& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < split; ++i) ga.data()[i] += g.data()[i];
                       }
                       if (t.requires_grad(ib)) {
                         Matrix& gb = t.grad_buffer(ib);
                         for (std::size_t i = 0; i < gb.size(); ++i) gb.data()[i] += g.data()[split + i];
                       }
                     });
}

Tensor slice_rows(Tensor x, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of(x, "slice_rows");
  const Matrix& v = x.value();
  if (begin > end || end > v.rows())
    throw ShapeError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + shape(v));
  const std::size_t d = v.cols();
  Matrix out(end - begin, d,
             std::vector<double>(v.data() + begin * d, v.data() + end * d));
  const auto ix = x.id();
  return tape.record(OpKind::slice_rows, {ix}, std::move(out), [ix, begin, d](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    double* dst = t.grad_buffer(ix).data() + begin * d;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g.data()[i];
  });
}

Tensor relu(Tensor x) {
  Tape& tape = tape_of(x, "relu");
  Matrix out = x.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  const auto ix = x.id();
  return tape.record(OpKind::relu, {ix}, std::move(out), [ix](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& in = t.value(ix);
    Matrix& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in.data()[i] > 0.0) gx.data()[i] += g.data()[i];
  });
}

Tensor sigmoid(Tensor x) {
  Tape& tape = tape_of(x, "sigmoid");
  Matrix out = x.value();
  for (auto& v : out.values()) v = stable_sigmoid(v);
  const auto ix = x.id();
  return tape.record(OpKind::sigmoid, {ix}, std::move(out), [ix](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i)
      gx.data()[i] += g.data()[i] * y.data()[i] * (1.0 - y.data()[i]);
  });
}

Tensor gather_rows(Tensor x, std::span<const NodeId> rows) {
  Tape& tape = tape_of(x, "gather_rows");
  const Matrix& v = x.value();
  const std::size_t d = v.cols();
  Matrix out(rows.size(), d);
  std::vector<NodeId> idx(rows.begin(), rows.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= v.rows())
      throw ShapeError("gather_rows: index " + std::to_string(idx[i]) + " outside " + shape(v));
    std::copy(v.row(idx[i]).begin(), v.row(idx[i]).end(), out.row(i).begin());
  }
  const auto ix = x.id();
  return tape.record(OpKind::gather_rows, {ix}, std::move(out),
                     [ix, idx = std::move(idx), d](Tape& t, std::size_t self) {
                       const Matrix& g = t.grad(self);
                       Matrix& gx = t.grad_buffer(ix);
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         double* dst = gx.data() + idx[i] * d;
                         const double* src = g.data() + i * d;
                         for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
                       }
                     });
}

Tensor sum(Tensor x) {
  Tape& tape = tape_of(x, "sum");
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const auto ix = x.id();
  return tape.record(OpKind::sum, {ix}, Matrix(1, 1, total), [ix](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    for (auto& v : t.grad_buffer(ix).values()) v += g;
  });
}

Tensor mean(Tensor x) {
  Tape& tape = tape_of(x, "mean");
  const std::size_t count = x.value().size();
  if (count == 0) throw ShapeError("mean of an empty tensor");
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const auto ix = x.id();
  return tape.record(OpKind::mean, {ix}, Matrix(1, 1, total / static_cast<double>(count)),
                     [ix, count](Tape& t, std::size_t self) {
                       const double g = t.grad(self)(0, 0) / static_cast<double>(count);
                       for (auto& v : t.grad_buffer(ix).values()) v += g;
                     });
}

Tensor scale(Tensor x, Tensor s) {
  Tape& tape = same_tape(x, s, "scale");
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("scale: factor must be 1x1");
  const double factor = s.value()(0, 0);
  Matrix out = x.value();
  for (auto& v : out.values()) v *= factor;
  const auto ix = x.id();
  const auto is = s.id();
  return tape.record(OpKind::scale, {ix, is}, std::move(out), [ix, is](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& in = t.value(ix);
    if (t.requires_grad(ix)) {
      const double factor = t.value(is)(0, 0);
      Matrix& gx = t.grad_buffer(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += factor * g.data()[i];
    }
    if (t.requires_grad(is)) {
      double dot = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += g.data()[i] * in.data()[i];
      t.grad_buffer(is)(0, 0) += dot;
    }
  });
}

Tensor scale(Tensor x, double factor) {
  Tape& tape = tape_of(x, "scale");
  Matrix out = x.value();
  for (auto& v : out.values()) v *= factor;
  const auto ix = x.id();
  return tape.record(OpKind::scale_const, {ix}, std::move(out), [ix, factor](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] += factor * g.data()[i];
  });
}

Tensor add_scalar(Tensor x, double s) {
  Tape& tape = tape_of(x, "add_scalar");
  Matrix out = x.value();
  for (auto& v : out.values()) v += s;
  const auto ix = x.id();
  return tape.record(OpKind::add_const, {ix}, std::move(out), [ix](Tape& t, std::size_t self) {
    accumulate(t.grad_buffer(ix), t.grad(self));
  });
}

Tensor add_bias(Tensor x, Tensor bias) {
  Tape& tape = same_tape(x, bias, "add_bias");
  const Matrix& v = x.value();
  const Matrix& b = bias.value();
  if (b.rows() != 1 || b.cols() != v.cols())
    throw ShapeError("add_bias: bias " + shape(b) + " for input " + shape(v));
  Matrix out = v;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += b(0, c);
  const auto ix = x.id();
  const auto ib = bias.id();
  return tape.record(OpKind::add_bias, {ix, ib}, std::move(out), [ix, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ix)) accumulate(t.grad_buffer(ix), g);
    if (t.requires_grad(ib)) {
      Matrix& gb = t.grad_buffer(ib);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
    }
  });
}

Tensor row_sum(Tensor x) {
  Tape& tape = tape_of(x, "row_sum");
  const Matrix& v = x.value();
  Matrix out(v.rows(), 1);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double s = 0.0;
    for (double e : v.row(r)) s += e;
    out(r, 0) = s;
  }
  const auto ix = x.id();
  return tape.record(OpKind::row_sum, {ix}, std::move(out), [ix](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad_buffer(ix);
    for (std::size_t r = 0; r < gx.rows(); ++r)
      for (auto& e : gx.row(r)) e += g(r, 0);
  });
}

Tensor spmm_const(const CsrMatrix& m, Tensor x) {
  Tape& tape = tape_of(x, "spmm_const");
  Matrix out = spmm(m, x.value());
  const auto ix = x.id();
  return tape.record(OpKind::spmm, {ix}, std::move(out), [ix, &m](Tape& t, std::size_t self) {
    accumulate(t.grad_buffer(ix), spmm_t(m, t.grad(self)));
  });
}

Tensor spmm_t_const(const CsrMatrix& m, Tensor x) {
  Tape& tape = tape_of(x, "spmm_t_const");
  Matrix out = spmm_t(m, x.value());
  const auto ix = x.id();
  return tape.record(OpKind::spmm_t, {ix}, std::move(out), [ix, &m](Tape& t, std::size_t self) {
    accumulate(t.grad_buffer(ix), spmm(m, t.grad(self)));
  });
}

Tensor spmm_const(std::shared_ptr<const CsrMatrix> m, Tensor x) {
  Tape& tape = tape_of(x, "spmm_const");
  if (!m) throw ShapeError("spmm_const: null matrix");
  Matrix out = spmm(*m, x.value());
  const auto ix = x.id();
  return tape.record(OpKind::spmm, {ix}, std::move(out), [ix, m = std::move(m)](Tape& t, std::size_t self) {
    accumulate(t.grad_buffer(ix), spmm_t(*m, t.grad(self)));
  });
}

Tensor bce_with_logits(Tensor logits, std::span<const int> labels) {
  Tape& tape = tape_of(logits, "bce_with_logits");
  const Matrix& z = logits.value();
  if (z.cols() != 1 || z.rows() != labels.size())
    throw ShapeError("bce_with_logits: logits " + shape(z) + " for " +
                     std::to_string(labels.size()) + " labels");
  if (z.rows() == 0) throw ShapeError("bce_with_logits: empty batch");
  std::vector<int> y(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw ShapeError("bce_with_logits: labels must be 0 or 1");
    const double v = z(i, 0);
    if (!std::isfinite(v)) throw TrainingError("bce_with_logits: non-finite logit at row " + std::to_string(i));
    // max(z,0) - z*y + log(1 + exp(-|z|))
    total += std::max(v, 0.0) - v * y[i] + std::log1p(std::exp(-std::abs(v)));
  }
  const double n = static_cast<double>(y.size());
  const auto iz = logits.id();
  return tape.record(OpKind::bce_with_logits, {iz}, Matrix(1, 1, total / n),
                     [iz, y = std::move(y), n](Tape& t, std::size_t self) {
                       const double g = t.grad(self)(0, 0) / n;
                       const Matrix& z = t.value(iz);
                       Matrix& gz = t.grad_buffer(iz);
                       for (std::size_t i = 0; i < y.size(); ++i)
                         gz(i, 0) += g * (stable_sigmoid(z(i, 0)) - y[i]);
                     });
}

Tensor ce_pairwise(Tensor logits, std::span<const int> classes) {
  Tape& tape = tape_of(logits, "ce_pairwise");
  const Matrix& z = logits.value();
  if (z.cols() != 2 || z.rows() != classes.size())
    throw ShapeError("ce_pairwise: logits " + shape(z) + " for " +
                     std::to_string(classes.size()) + " samples");
  if (z.rows() == 0) throw ShapeError("ce_pairwise: empty batch");
  std::vector<int> cls(classes.begin(), classes.end());
  double total = 0.0;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] != 0 && cls[i] != 1) throw ShapeError("ce_pairwise: class must be 0 or 1");
    const double a = z(i, 0);
    const double b = z(i, 1);
    if (!std::isfinite(a) || !std::isfinite(b))
      throw TrainingError("ce_pairwise: non-finite logit at row " + std::to_string(i));
    // softplus(z_other - z_class); avoids cancelling logsumexp against z_class.
    const double d = cls[i] == 0 ? b - a : a - b;
    total += std::max(d, 0.0) + std::log1p(std::exp(-std::abs(d)));
  }
  const double n = static_cast<double>(cls.size());
  const auto iz = logits.id();
  return tape.record(OpKind::ce_pairwise, {iz}, Matrix(1, 1, total / n),
                     [iz, cls = std::move(cls), n](Tape& t, std::size_t self) {
                       const double g = t.grad(self)(0, 0) / n;
                       const Matrix& z = t.value(iz);
                       Matrix& gz = t.grad_buffer(iz);
                       for (std::size_t i = 0; i < cls.size(); ++i) {
                         const double p1 = stable_sigmoid(z(i, 1) - z(i, 0));
                         gz(i, 0) += g * ((1.0 - p1) - (cls[i] == 0 ? 1.0 : 0.0));
                         gz(i, 1) += g * (p1 - (cls[i] == 1 ? 1.0 : 0.0));
                       }
                     });
}

}  // namespace dirlink
