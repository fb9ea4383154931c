#include "dirlink/optim.hpp"

#include <cmath>

#include "dirlink/error.hpp"

namespace dirlink {

void adam_step(AdamState& state, std::span<Matrix> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: params and grads differ in count");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.rows(), p.cols());
      state.v.emplace_back(p.rows(), p.cols());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: parameter count changed");
  const AdamOptions& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = params[k];
    const Matrix& g = grads[k];
    if (!p.same_shape(g) || !p.same_shape(state.m[k]))
      throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(k));
    double* pd = p.data();
    const double* gd = g.data();
    double* md = state.m[k].data();
    double* vd = state.v[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = gd[i] + o.weight_decay * pd[i];
      md[i] = o.beta1 * md[i] + (1.0 - o.beta1) * gi;
      vd[i] = o.beta2 * vd[i] + (1.0 - o.beta2) * gi * gi;
      pd[i] -= o.lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + o.eps);
    }
  }
}

}  // namespace dirlink
