// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sparseseq/errors.hpp"

namespace sparseseq::num {

namespace {

double evaluate(const LossFn& fn) {
  Graph g;
  const double v = fn(g).value().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check_report(const LossFn& fn, ParameterSet& params, double eps) {
  params.zero_grad();
  {
    Graph g;
    Var loss = fn(g);
    if (!std::isfinite(loss.value().item())) throw NumericError("grad_check: loss is not finite");
    g.backward(loss);
  }

  std::map<std::string, Tensor> analytic;
  params.for_each([&](const Parameter& p) {
    if (!p.requires_grad) return;
    if (!p.grad.all_finite()) throw NumericError("grad_check: non-finite gradient in " + p.name);
    analytic[p.name] = p.grad;
  });

  GradCheckReport report;
  params.for_each([&](Parameter& p) {
    if (!p.requires_grad) return;
    const Tensor& grad = analytic[p.name];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + eps;
      const double up = evaluate(fn);
      p.value[i] = orig - eps;
      const double down = evaluate(fn);
      p.value[i] = orig;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = grad[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > report.max_relative_error) {
        report = {rel, p.name, i, a, numeric};
      }
    }
  });
  return report;
}

}  // namespace sparseseq::num
