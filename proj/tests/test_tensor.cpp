#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "dirlink/error.hpp"
#include "dirlink/optim.hpp"
#include "dirlink/tensor.hpp"
#include "oracles.hpp"

using namespace dirlink;

namespace {

using Builder = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

/// Wraps `build` in sum(out * weights) so every output entry gets a distinct
/// upstream gradient, then compares against central differences.
double op_gradient_error(std::vector<Matrix> inputs, const Builder& build) {
  auto loss_of = [&](Tape& tape, std::vector<Tensor>& params) {
    params.clear();
    for (const auto& m : inputs) params.push_back(tape.parameter(m));
    Tensor out = build(tape, params);
    const Matrix w = oracle::random_matrix(out.rows(), out.cols(), 1234);
    return sum(hadamard(out, tape.constant(w)));
  };
  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Tensor> params;
    Tensor loss = loss_of(tape, params);
    tape.backward(loss);
    for (auto& p : params) analytic.push_back(p.grad());
  }
  auto numeric = oracle::central_differences(inputs, [&] {
    Tape tape;
    std::vector<Tensor> params;
    return loss_of(tape, params).value()(0, 0);
  });
  return oracle::max_relative_error(analytic, numeric);
}

Matrix rnd(std::size_t r, std::size_t c, std::uint64_t seed) { return oracle::random_matrix(r, c, seed); }

}  // namespace

TEST(TensorOps, MatmulIdentity) {
  Tape tape;
  const Matrix x = rnd(3, 2, 1);
  EXPECT_EQ(matmul(tape.constant(Matrix::identity(3)), tape.constant(x)).value(), x);
  EXPECT_THROW(matmul(tape.constant(Matrix(2, 3)), tape.constant(Matrix(2, 3))), ShapeError);
}

TEST(TensorOps, ReluAndGather) {
  Tape tape;
  EXPECT_EQ(relu(tape.constant(Matrix{{-1, 2}})).value(), (Matrix{{0, 2}}));
  const Matrix x{{1, 2}, {3, 4}, {5, 6}};
  const std::vector<NodeId> idx{2, 0};
  EXPECT_EQ(gather_rows(tape.constant(x), idx).value(), (Matrix{{5, 6}, {1, 2}}));
  const std::vector<NodeId> bad{3};
  EXPECT_THROW(gather_rows(tape.constant(x), bad), ShapeError);
}

TEST(TensorOps, ShapeMismatchesThrow) {
  Tape tape;
  auto a = tape.constant(Matrix(2, 2));
  auto b = tape.constant(Matrix(3, 2));
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(hadamard(a, b), ShapeError);
  EXPECT_THROW(concat_cols(a, b), ShapeError);
  EXPECT_THROW(slice_rows(a, 1, 3), ShapeError);
  EXPECT_THROW(spmm_const(CsrMatrix::identity(3), a), ShapeError);
}

TEST(TensorOps, SigmoidStableAtExtremes) {
  Tape tape;
  const auto s = sigmoid(tape.constant(Matrix{{-1000, 0, 1000}})).value();
  EXPECT_EQ(s(0, 0), 0.0);
  EXPECT_EQ(s(0, 1), 0.5);
  EXPECT_EQ(s(0, 2), 1.0);
}

TEST(Losses, BceValues) {
  Tape tape;
  const std::vector<int> one{1};
  EXPECT_NEAR(bce_with_logits(tape.constant(Matrix{{0}}), one).value()(0, 0), std::log(2.0), 1e-15);
  const double big = bce_with_logits(tape.constant(Matrix{{1000}}), one).value()(0, 0);
  EXPECT_TRUE(std::isfinite(big));
  EXPECT_NEAR(big, 0.0, 1e-300);
  const std::vector<int> bad{2};
  EXPECT_THROW(bce_with_logits(tape.constant(Matrix{{0}}), bad), ShapeError);
  EXPECT_THROW(bce_with_logits(tape.constant(Matrix{{NAN}}), one), TrainingError);
}

TEST(Losses, CeValues) {
  Tape tape;
  const std::vector<int> zero{0};
  EXPECT_NEAR(ce_pairwise(tape.constant(Matrix{{0, 0}}), zero).value()(0, 0), std::log(2.0), 1e-15);
  const double v = ce_pairwise(tape.constant(Matrix{{10, -10}}), zero).value()(0, 0);
  EXPECT_NEAR(v, std::log1p(std::exp(-20.0)), 1e-20);
  EXPECT_NEAR(v, 2.06e-9, 0.01e-9);
  const std::vector<int> bad{2};
  EXPECT_THROW(ce_pairwise(tape.constant(Matrix{{0, 0}}), bad), ShapeError);
}

TEST(Tape, BackwardTwiceThrows) {
  Tape tape;
  auto x = tape.parameter(Matrix{{2}});
  auto loss = sum(hadamard(x, x));
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 4.0);
  EXPECT_THROW(tape.backward(loss), TrainingError);
  tape.reset_gradients();
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 4.0);
}

TEST(Tape, LossMustBeScalar) {
  Tape tape;
  auto x = tape.parameter(Matrix(2, 2));
  EXPECT_THROW(tape.backward(x), ShapeError);
}

TEST(Tape, UnreachedNodeHasZeroGradient) {
  Tape tape;
  auto x = tape.parameter(Matrix{{1, 2}});
  auto unused = tape.parameter(Matrix{{3}});
  tape.backward(sum(x));
  EXPECT_EQ(unused.grad(), Matrix(1, 1));
  EXPECT_EQ(x.grad(), (Matrix{{1, 1}}));
}

TEST(Tape, SpmmIdentityPassesGradientThrough) {
  Tape tape;
  const CsrMatrix id = CsrMatrix::identity(3);
  auto x = tape.parameter(rnd(3, 2, 4));
  const Matrix w = rnd(3, 2, 5);
  tape.backward(sum(hadamard(spmm_const(id, x), tape.constant(w))));
  EXPECT_EQ(x.grad(), w);
}

TEST(GradCheck, EveryOperator) {
  const CsrMatrix m = CsrMatrix::from_dense(rnd(4, 4, 77));
  const std::vector<NodeId> idx{3, 0, 3, 1};
  const std::vector<int> labels{1, 0, 1, 0};
  const std::vector<int> classes{0, 1, 1, 0};
  struct Case {
    const char* name;
    std::vector<Matrix> inputs;
    Builder build;
  };
  const std::vector<Case> cases = {
      {"matmul", {rnd(4, 3, 1), rnd(3, 2, 2)}, [](Tape&, auto& p) { return matmul(p[0], p[1]); }},
      {"add", {rnd(4, 3, 1), rnd(4, 3, 2)}, [](Tape&, auto& p) { return add(p[0], p[1]); }},
      {"sub", {rnd(4, 3, 1), rnd(4, 3, 2)}, [](Tape&, auto& p) { return sub(p[0], p[1]); }},
      {"hadamard", {rnd(4, 3, 1), rnd(4, 3, 2)}, [](Tape&, auto& p) { return hadamard(p[0], p[1]); }},
      {"concat_cols", {rnd(4, 3, 1), rnd(4, 2, 2)}, [](Tape&, auto& p) { return concat_cols(p[0], p[1]); }},
      {"concat_rows", {rnd(4, 3, 1), rnd(2, 3, 2)}, [](Tape&, auto& p) { return concat_rows(p[0], p[1]); }},
      {"slice_rows", {rnd(5, 3, 1)}, [](Tape&, auto& p) { return slice_rows(p[0], 1, 4); }},
      {"relu", {rnd(4, 3, 1)}, [](Tape&, auto& p) { return relu(p[0]); }},
      {"sigmoid", {rnd(4, 3, 1)}, [](Tape&, auto& p) { return sigmoid(p[0]); }},
      {"gather_rows", {rnd(4, 3, 1)}, [&](Tape&, auto& p) { return gather_rows(p[0], idx); }},
      {"mean", {rnd(4, 3, 1)}, [](Tape&, auto& p) { return mean(p[0]); }},
      {"scale", {rnd(4, 3, 1), rnd(1, 1, 2)}, [](Tape&, auto& p) { return scale(p[0], p[1]); }},
      {"scale_const", {rnd(4, 3, 1)}, [](Tape&, auto& p) { return scale(p[0], -1.7); }},
      {"add_scalar", {rnd(4, 3, 1)}, [](Tape&, auto& p) { return add_scalar(p[0], 0.3); }},
      {"add_bias", {rnd(4, 3, 1), rnd(1, 3, 2)}, [](Tape&, auto& p) { return add_bias(p[0], p[1]); }},
      {"row_sum", {rnd(4, 3, 1)}, [](Tape&, auto& p) { return row_sum(p[0]); }},
      {"spmm", {rnd(4, 3, 1)}, [&](Tape&, auto& p) { return spmm_const(m, p[0]); }},
      {"spmm_t", {rnd(4, 3, 1)}, [&](Tape&, auto& p) { return spmm_t_const(m, p[0]); }},
      {"bce", {rnd(4, 1, 1)}, [&](Tape&, auto& p) { return bce_with_logits(p[0], labels); }},
      {"ce", {rnd(4, 2, 1)}, [&](Tape&, auto& p) { return ce_pairwise(p[0], classes); }},
  };
  for (const auto& c : cases) EXPECT_LE(op_gradient_error(c.inputs, c.build), 1e-6) << c.name;
}

TEST(GradCheck, SharedSubexpression) {
  // x feeds two branches; gradients must accumulate.
  const double err = op_gradient_error({rnd(3, 3, 8)}, [](Tape&, auto& p) {
    return add(matmul(p[0], p[0]), sigmoid(p[0]));
  });
  EXPECT_LE(err, 1e-6);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  AdamState state;
  std::vector<Matrix> params{rnd(2, 2, 1)};
  const auto before = params;
  const std::vector<Matrix> grads{Matrix(2, 2)};
  for (int i = 0; i < 10; ++i) adam_step(state, params, grads);
  EXPECT_EQ(params, before);
}

TEST(Adam, MinimizesQuadratic) {
  AdamState state;
  state.options.lr = 0.1;
  std::vector<Matrix> x{Matrix{{1.0}}};
  for (int i = 0; i < 1000; ++i) {
    const std::vector<Matrix> g{Matrix{{2 * x[0](0, 0)}}};
    adam_step(state, x, g);
  }
  EXPECT_LE(std::abs(x[0](0, 0)), 1e-3);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamState state;
  state.options.lr = 0.05;
  std::vector<Matrix> x{Matrix{{1.0, -2.0}}};
  const std::vector<Matrix> g{Matrix{{3.0, -0.5}}};
  adam_step(state, x, g);
  // Bias correction makes the first step ~lr * sign(g).
  EXPECT_NEAR(x[0](0, 0), 0.95, 1e-8);
  EXPECT_NEAR(x[0](0, 1), -1.95, 1e-7);
}

TEST(Adam, WeightDecayPullsTowardZero) {
  AdamState state;
  state.options.weight_decay = 1.0;
  std::vector<Matrix> x{Matrix{{1.0}}};
  const std::vector<Matrix> g{Matrix{{0.0}}};
  adam_step(state, x, g);
  EXPECT_LT(x[0](0, 0), 1.0);
}

TEST(Adam, ShapeMismatchThrows) {
  AdamState state;
  std::vector<Matrix> x{Matrix(2, 2)};
  const std::vector<Matrix> g{Matrix(2, 3)};
  EXPECT_THROW(adam_step(state, x, g), ShapeError);
}
