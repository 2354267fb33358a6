// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/numcore/optim.hpp"

#include <cmath>

#include "sparseseq/errors.hpp"

namespace sparseseq::num {

void adam_step(ParameterSet& params, OptimizerState& state) {
  params.for_each([](const Parameter& p) {
    if (!p.requires_grad || p.grad.empty()) return;
    if (p.grad.shape() != p.value.shape()) {
      throw DimensionError("adam_step: gradient of '" + p.name + "' has shape " +
                           shape_string(p.grad.shape()) + ", parameter " +
                           shape_string(p.value.shape()));
    }
    if (!p.grad.all_finite()) {
      throw NumericError("adam_step: non-finite gradient in parameter '" + p.name + "'");
    }
  });

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  params.for_each([&](Parameter& p) {
    if (!p.requires_grad || p.grad.empty()) return;
    Moments& mom = state.moments[p.name];
    if (mom.first.shape() != p.value.shape()) {
      mom.first = Tensor(p.value.shape());
      mom.second = Tensor(p.value.shape());
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      mom.first[i] = c.beta1 * mom.first[i] + (1.0 - c.beta1) * g;
      mom.second[i] = c.beta2 * mom.second[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = mom.first[i] / correction1;
      const double v_hat = mom.second[i] / correction2;
      p.value[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  });
}

}  // namespace sparseseq::num
