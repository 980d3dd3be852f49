#pragma once

// Define-by-run reverse-mode differentiation over dense tensors.
//
// A Graph records every primitive as it is evaluated; backward() walks the
// tape in reverse and returns gradients for the parameter leaves. Rank-2
// tensors are batches of row vectors and rank-1 tensors hold one scalar per
// row, which lets one node cover every candidate phrase of a document.
//
// Forward arithmetic goes through hypermatch::kernels so that a graph
// evaluation matches the eager API exactly.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "hypermatch/tensor.hpp"

namespace hypermatch::autodiff {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the Graph lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph* graph() const noexcept { return graph_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient of the backward seed with respect to one parameter slot.
struct LeafGradient {
  std::size_t slot;
  Tensor grad;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// A leaf that never receives gradients.
  Var constant(Tensor value);

  /// A non-differentiable leaf that refers to `value` without copying it;
  /// `value` must outlive the graph.
  Var constant_ref(const Tensor& value);

  /// A differentiable leaf bound to `value`, which must outlive the graph.
  /// Gradients are reported under `slot`; leaves sharing a slot are summed.
  Var parameter(const Tensor& value, std::size_t slot);

  /// Reverse pass from `output`. Every parameter slot registered on this
  /// graph appears exactly once in the result (zeros if unreachable).
  /// Throws StateError if `output` was not produced by this graph.
  std::vector<LeafGradient> backward(Var output, const Tensor& seed);
  /// Seeds a single-element output with 1.
  std::vector<LeafGradient> backward(Var output);

  std::size_t node_count() const noexcept { return nodes_.size(); }

  // Node plumbing used by the primitive implementations.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn);
  const Tensor& value_of(std::size_t id) const;
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Mutable gradient buffer of `id`, zero-initialised on first use.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    const char* op;
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::size_t slot = 0;
    bool is_parameter = false;
    BackwardFn backward;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

// ---- elementwise -----------------------------------------------------------

Var neg(Var x);
Var tanh(Var x);
/// atanh with its argument clamped to [0, 1 - 1e-12]; the derivative is
/// taken at the clamped argument.
Var atanh_clamped(Var x);
Var sqrt(Var x);
Var reciprocal(Var x);
Var relu(Var x);
Var clamp_min(Var x, double lo);
Var scale(Var x, double a);
Var add_scalar(Var x, double b);
/// a * x + b.
Var affine(Var x, double a, double b);

// Binary ops accept equal shapes or a single-element operand on either side.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

// ---- row-batched -----------------------------------------------------------

/// [R, d] x [R, d] -> [R].
Var rowdot(Var x, Var y);
/// Euclidean norm of every row: [R, d] -> [R].
Var norm_rows(Var x);
/// x[r, :] * s[r].
Var scale_rows(Var x, Var s);
/// x[r, :] / s[r].
Var div_rows(Var x, Var s);
/// Column sums: [R, d] -> [1, d].
Var col_sum(Var x);
Var sum(Var x);
Var mean(Var x);
Var gather_rows(Var x, std::vector<std::size_t> rows);
Var repeat_rows(Var x, std::size_t times);
Var concat_rows(std::span<const Var> parts);
Var reshape(Var x, Shape shape);
/// Row-wise softmax of [R, C].
Var softmax_rows(Var x);
/// out[p, q] = b[q] - a[p].
Var outer_sub(Var a, Var b);
/// Rows pulled back onto the (1 - 1e-5)-shrunk ball of curvature c.
Var ball_project_rows(Var x, double c);

// ---- linear ----------------------------------------------------------------

/// [m, k] x [k, n].
Var matmul(Var a, Var b);
/// [m, k] x [n, k]^T.
Var matmul_nt(Var a, Var b);
/// Stride-1 valid convolution of x[T, d_in] with w[width, d_in, d_out] and
/// an optional bias[d_out] (pass an invalid Var for none).
Var conv1d(Var x, Var w, Var bias = {});
/// out[i, :] = sum_l alpha[i, l] * h[i, l, :] for h[M, L, d], alpha[M, L].
Var weighted_layer_sum(Var h, Var alpha);

}  // namespace hypermatch::autodiff
