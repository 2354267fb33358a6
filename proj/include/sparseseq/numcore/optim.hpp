// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "sparseseq/numcore/params.hpp"

namespace sparseseq::num {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct Moments {
  Tensor first;
  Tensor second;
};

/// Adam state. Moment buffers are created lazily, keyed by parameter name,
/// with the parameter's shape.
struct OptimizerState {
  AdamConfig config;
  std::size_t step = 0;
  std::map<std::string, Moments> moments;
};

/// One bias-corrected Adam update of every parameter with requires_grad,
/// using Parameter::grad. Frozen parameters are left untouched. A non-finite
/// gradient aborts the update before anything is modified and throws
/// NumericError naming the parameter.
void adam_step(ParameterSet& params, OptimizerState& state);

}  // namespace sparseseq::num
