#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dirlink/dense.hpp"

namespace dirlink {

struct AdamOptions {
  double lr = 0.01;
  /// L2 penalty added to the gradient before the moment updates.
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::size_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// One bias-corrected Adam update of `params` in place.
/// Moment buffers are created on the first call; shapes must stay fixed.
void adam_step(AdamState& state, std::span<Matrix> params, std::span<const Matrix> grads);

}  // namespace dirlink
