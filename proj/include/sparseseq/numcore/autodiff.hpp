// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "sparseseq/numcore/params.hpp"
#include "sparseseq/numcore/tensor.hpp"

// Reverse-mode automatic differentiation over rank-2 tensors.
//
// A Graph is a tape: every primitive appends one node holding its output value
// and, when any input needs a gradient, a closure that pushes the output
// gradient back to its inputs. Nodes are appended in evaluation order, so the
// tape is topologically sorted by construction and backward() is one reverse
// sweep.
//
// Leaves are either constants (data, masks) or parameters. Parameter leaves
// alias the parameter's value and accumulate straight into Parameter::grad.
//
// A Graph is single-threaded. Build a fresh one per forward pass.

namespace sparseseq::num {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its Graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool requires_grad() const;
  bool valid() const noexcept { return graph_ != nullptr; }

  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  /// Pushes `out_grad` (dLoss/dOutput) to the inputs via Graph::grad_slot.
  using Backprop = std::function<void(Graph&, const Tensor& out_grad)>;

  Graph() = default;
  /// grad_enabled = false treats every parameter as a constant (inference).
  explicit Graph(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf aliasing `p.value`. The parameter must outlive the graph.
  Var param(Parameter& p);

  /// Append a node. `fn` is kept only if some input requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backprop fn);
  Var record(Tensor value, std::span<const Var> inputs, Backprop fn);

  const Tensor& value(Var v) const;
  /// Value of the node at tape position `id` (used by closures to reach their own output).
  const Tensor& node_value(std::size_t id) const;
  bool requires_grad(Var v) const { return nodes_[v.id_].needs_grad; }

  /// Gradient accumulator for `v`, allocated as zeros on first use; nullptr
  /// when `v` does not require a gradient. Only meaningful inside backward().
  Tensor* grad_slot(Var v);

  /// Reverse sweep from a scalar loss. Parameter gradients accumulate (+=);
  /// every parameter leaf on the tape ends with an allocated gradient, zero
  /// if the loss does not reach it.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* alias = nullptr;  // parameter leaves
    Parameter* param = nullptr;
    bool needs_grad = false;
    Backprop backprop;
    Tensor grad;
  };

  void check_owner(Var v, const char* op) const;

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

// ---------------------------------------------------------------------------
// Primitives. Binary elementwise ops accept equal shapes, or a 1xC right-hand
// side broadcast over the rows of the left-hand side (bias add, per-column
// scaling). Shape errors throw DimensionError naming the primitive.
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

/// alpha * a + beta
Var affine(Var a, double alpha, double beta);
inline Var scale(Var a, double s) { return affine(a, s, 0.0); }
inline Var one_minus(Var a) { return affine(a, -1.0, 1.0); }

Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var relu(Var a);
Var square(Var a);
Var log(Var a);
/// Subgradient at zero is 0.
Var abs(Var a);

Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

/// Sum of all entries, as a 1x1 tensor.
Var sum(Var a);
/// Sum of entries where mask != 0. Masked-out entries are skipped outright:
/// they contribute nothing to the value and receive exactly zero gradient.
Var masked_sum(Var a, const Tensor& mask);

/// Row-wise softmax / log-softmax (max-shifted for stability).
Var softmax(Var a);
Var log_softmax(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace sparseseq::num
