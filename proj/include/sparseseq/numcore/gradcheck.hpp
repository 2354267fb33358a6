// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>

#include "sparseseq/numcore/autodiff.hpp"
#include "sparseseq/numcore/params.hpp"

namespace sparseseq::num {

/// Builds a scalar loss on the given graph from parameters it captures.
/// Must be deterministic (no dropout).
using LossFn = std::function<Var(Graph&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares backward() against central differences over every entry of every
/// parameter with requires_grad. Relative error per entry is
/// |a - n| / max(|a|, |n|, 1e-8). Throws NumericError on non-finite values.
GradCheckReport grad_check_report(const LossFn& fn, ParameterSet& params, double eps = 1e-5);

inline double grad_check(const LossFn& fn, ParameterSet& params, double eps = 1e-5) {
  return grad_check_report(fn, params, eps).max_relative_error;
}

}  // namespace sparseseq::num
