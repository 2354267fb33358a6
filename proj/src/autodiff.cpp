// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/numcore/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparseseq/errors.hpp"
#include "sparseseq/numcore/kernels.hpp"

namespace sparseseq::num {

const Tensor& Var::value() const { return graph_->value(*this); }
bool Var::requires_grad() const { return graph_->requires_grad(*this); }

void Graph::check_owner(Var v, const char* op) const {
  if (v.graph_ != this || v.id_ >= nodes_.size()) {
    throw ContractError(std::string(op) + ": variable does not belong to this graph");
  }
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(Parameter& p) {
  Node n;
  n.alias = &p.value;
  n.param = &p;
  n.needs_grad = p.requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, Backprop fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, Backprop fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    check_owner(in, "Graph::record");
    n.needs_grad = n.needs_grad || nodes_[in.id_].needs_grad;
  }
  if (n.needs_grad) n.backprop = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(Var v) const {
  const Node& n = nodes_[v.id_];
  return n.alias ? *n.alias : n.value;
}

const Tensor& Graph::node_value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.alias ? *n.alias : n.value;
}

Tensor* Graph::grad_slot(Var v) {
  Node& n = nodes_[v.id_];
  if (!n.needs_grad) return nullptr;
  if (n.param) {
    if (n.param->grad.shape() != n.param->value.shape()) n.param->zero_grad();
    return &n.param->grad;
  }
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return &n.grad;
}

void Graph::backward(Var loss) {
  check_owner(loss, "backward");
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(lv.shape()));
  }
  for (Node& n : nodes_) {
    if (n.param && n.param->requires_grad && n.param->grad.shape() != n.param->value.shape()) {
      n.param->zero_grad();
    }
  }
  if (!nodes_[loss.id_].needs_grad) return;

  if (Tensor* seed = grad_slot(loss)) (*seed)[0] += 1.0;

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backprop || n.grad.empty()) continue;
    n.backprop(*this, n.grad);
    n.grad = Tensor();  // intermediate gradients are not needed afterwards
  }
}

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 operand, got " +
                         shape_string(t.shape()));
  }
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                       " and " + shape_string(b.shape()));
}

/// True when b is broadcast over the rows of a; throws if neither equal nor broadcastable.
bool broadcast_rows(const char* op, const Tensor& a, const Tensor& b) {
  require_rank2(a, op);
  require_rank2(b, op);
  if (a.shape() == b.shape()) return false;
  if (b.rows() == 1 && b.cols() == a.cols()) return true;
  shape_error(op, a, b);
}

/// Reduce a gradient of a's shape into b's shape (sum over rows when broadcast).
void accumulate_into(Tensor& dst, const Tensor& src, bool broadcast, double sign = 1.0) {
  if (!broadcast) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += sign * src[i];
    return;
  }
  const std::size_t c = src.cols();
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) dst[j] += sign * src[r * c + j];
}

template <typename Fwd, typename Deriv>
Var unary(Var a, const char* op, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  require_rank2(x, op);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  return a.graph().record(std::move(y), {a}, [a, deriv](Graph& g, const Tensor& gy) {
    Tensor* gx = g.grad_slot(a);
    if (!gx) return;
    const Tensor& xv = g.value(a);
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += gy[i] * deriv(xv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor c({m, n});
  kernels::gemm_nn(av.data(), bv.data(), c.data(), m, k, n);
  return a.graph().record(std::move(c), {a, b}, [a, b, m, k, n](Graph& g, const Tensor& gc) {
    if (Tensor* ga = g.grad_slot(a)) {
      kernels::gemm_nt(gc.data(), g.value(b).data(), ga->data(), m, k, n, true);
    }
    if (Tensor* gb = g.grad_slot(b)) {
      kernels::gemm_tn(g.value(a).data(), gc.data(), gb->data(), m, k, n, true);
    }
  });
}

Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool bc = broadcast_rows("add", av, bv);
  Tensor y = av;
  const std::size_t c = av.cols();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[bc ? i % c : i];
  return a.graph().record(std::move(y), {a, b}, [a, b, bc](Graph& g, const Tensor& gy) {
    if (Tensor* ga = g.grad_slot(a)) accumulate_into(*ga, gy, false);
    if (Tensor* gb = g.grad_slot(b)) accumulate_into(*gb, gy, bc);
  });
}

Var sub(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool bc = broadcast_rows("sub", av, bv);
  Tensor y = av;
  const std::size_t c = av.cols();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[bc ? i % c : i];
  return a.graph().record(std::move(y), {a, b}, [a, b, bc](Graph& g, const Tensor& gy) {
    if (Tensor* ga = g.grad_slot(a)) accumulate_into(*ga, gy, false);
    if (Tensor* gb = g.grad_slot(b)) accumulate_into(*gb, gy, bc, -1.0);
  });
}

Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool bc = broadcast_rows("mul", av, bv);
  Tensor y = av;
  const std::size_t c = av.cols();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[bc ? i % c : i];
  return a.graph().record(std::move(y), {a, b}, [a, b, bc, c](Graph& g, const Tensor& gy) {
    const Tensor& av2 = g.value(a);
    const Tensor& bv2 = g.value(b);
    if (Tensor* ga = g.grad_slot(a)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * bv2[bc ? i % c : i];
    }
    if (Tensor* gb = g.grad_slot(b)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[bc ? i % c : i] += gy[i] * av2[i];
    }
  });
}

Var affine(Var a, double alpha, double beta) {
  const Tensor& x = a.value();
  require_rank2(x, "affine");
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = alpha * x[i] + beta;
  return a.graph().record(std::move(y), {a}, [a, alpha](Graph& g, const Tensor& gy) {
    if (Tensor* gx = g.grad_slot(a))
      for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += alpha * gy[i];
  });
}

namespace {

/// Elementwise op with derivative expressed through the output value y.
template <typename Fwd, typename DerivY>
Var from_output(Var a, const char* op, Fwd fwd, DerivY deriv_y) {
  const Tensor& x = a.value();
  require_rank2(x, op);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const std::size_t out_id = a.graph().size();
  return a.graph().record(std::move(y), {a}, [a, out_id, deriv_y](Graph& g, const Tensor& gy) {
    Tensor* gx = g.grad_slot(a);
    if (!gx) return;
    const Tensor& ys = g.node_value(out_id);
    for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * deriv_y(ys[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var sigmoid(Var a) {
  return from_output(a, "sigmoid", stable_sigmoid, [](double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return from_output(a, "tanh", [](double x) { return std::tanh(x); },
                     [](double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return from_output(a, "exp", [](double x) { return std::exp(x); }, [](double y) { return y; });
}

Var relu(Var a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var log(Var a) {
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var abs(Var a) {
  return unary(a, "abs", [](double x) { return std::fabs(x); },
               [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    require_rank2(v, "concat_cols");
    if (v.rows() != rows) shape_error("concat_cols", parts[0].value(), v);
    offsets.push_back(total);
    total += v.cols();
  }
  Tensor y({rows, total});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    const std::size_t c = v.cols();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.raw() + r * c, c, y.raw() + r * total + offsets[k]);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  Graph& g0 = parts[0].graph();
  return g0.record(std::move(y), std::span<const Var>(inputs),
                   [inputs, offsets, rows, total](Graph& g, const Tensor& gy) {
                     for (std::size_t k = 0; k < inputs.size(); ++k) {
                       Tensor* gx = g.grad_slot(inputs[k]);
                       if (!gx) continue;
                       const std::size_t c = gx->cols();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < c; ++j)
                           (*gx)[r * c + j] += gy[r * total + offsets[k] + j];
                     }
                   });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  require_rank2(x, "slice_cols");
  if (begin > end || end > x.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of bounds for " + shape_string(x.shape()));
  }
  const std::size_t rows = x.rows(), cols = x.cols(), w = end - begin;
  Tensor y({rows, w});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.raw() + r * cols + begin, w, y.raw() + r * w);
  return a.graph().record(std::move(y), {a}, [a, begin, rows, cols, w](Graph& g, const Tensor& gy) {
    Tensor* gx = g.grad_slot(a);
    if (!gx) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < w; ++j) (*gx)[r * cols + begin + j] += gy[r * w + j];
  });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  require_rank2(x, "sum");
  double s = 0.0;
  for (double v : x.data()) s += v;
  return a.graph().record(Tensor::scalar(s), {a}, [a](Graph& g, const Tensor& gy) {
    Tensor* gx = g.grad_slot(a);
    if (!gx) return;
    const double d = gy[0];
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += d;
  });
}

Var masked_sum(Var a, const Tensor& mask) {
  const Tensor& x = a.value();
  require_rank2(x, "masked_sum");
  if (!x.same_shape(mask)) shape_error("masked_sum", x, mask);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask[i] != 0.0) s += x[i];
  return a.graph().record(Tensor::scalar(s), {a}, [a, mask](Graph& g, const Tensor& gy) {
    Tensor* gx = g.grad_slot(a);
    if (!gx) return;
    const double d = gy[0];
    for (std::size_t i = 0; i < gx->size(); ++i)
      if (mask[i] != 0.0) (*gx)[i] += d;
  });
}

namespace {

Tensor row_softmax(const Tensor& x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.raw() + r * cols;
    double* yr = y.raw() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) yr[j] /= z;
  }
  return y;
}

}  // namespace

Var softmax(Var a) {
  const Tensor& x = a.value();
  require_rank2(x, "softmax");
  Tensor y = row_softmax(x);
  const std::size_t out_id = a.graph().size();
  return a.graph().record(std::move(y), {a}, [a, out_id](Graph& g, const Tensor& gy) {
    Tensor* gx = g.grad_slot(a);
    if (!gx) return;
    const Tensor& ys = g.node_value(out_id);
    const std::size_t rows = ys.rows(), cols = ys.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += gy[r * cols + j] * ys[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j)
        (*gx)[r * cols + j] += ys[r * cols + j] * (gy[r * cols + j] - dot);
    }
  });
}

Var log_softmax(Var a) {
  const Tensor& x = a.value();
  require_rank2(x, "log_softmax");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.raw() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += std::exp(xr[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < cols; ++j) y[r * cols + j] = xr[j] - lse;
  }
  const std::size_t out_id = a.graph().size();
  return a.graph().record(std::move(y), {a}, [a, out_id, rows, cols](Graph& g, const Tensor& gy) {
    Tensor* gx = g.grad_slot(a);
    if (!gx) return;
    const Tensor& ly = g.node_value(out_id);
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < cols; ++j) total += gy[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j)
        (*gx)[r * cols + j] += gy[r * cols + j] - std::exp(ly[r * cols + j]) * total;
    }
  });
}

}  // namespace sparseseq::num
