#include "hypermatch/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hypermatch/error.hpp"
#include "hypermatch/kernels.hpp"

namespace hypermatch::autodiff {

const Tensor& Var::value() const {
  if (!graph_) throw StateError("value() on an unbound Var");
  return graph_->value_of(id_);
}

// ---- Graph -----------------------------------------------------------------

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::constant_ref(const Tensor& value) {
  Node n;
  n.op = "constant";
  n.external = &value;
  return push(std::move(n));
}

Var Graph::parameter(const Tensor& value, std::size_t slot) {
  Node n;
  n.op = "parameter";
  n.external = &value;
  n.requires_grad = true;
  n.is_parameter = true;
  n.slot = slot;
  return push(std::move(n));
}

const Tensor& Graph::value_of(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(value_of(id).shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

Var Graph::record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Graph::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs_grad = false;
  for (const Var& in : inputs) {
    if (in.graph() != this) throw InvalidArgument(std::string(op) + ": input belongs to a different graph");
    needs_grad = needs_grad || nodes_[in.id()].requires_grad;
  }
  if (!value.all_finite()) {
    throw NumericFailure(std::string("non-finite value produced by node #") + std::to_string(nodes_.size()) + " (" +
                         op + ")");
  }
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.requires_grad = needs_grad;
  if (needs_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

std::vector<LeafGradient> Graph::backward(Var output) {
  if (!output.valid() || output.graph() != this) {
    throw StateError("backward requested before a forward pass produced the output");
  }
  if (output.value().size() != 1) throw InvalidArgument("backward(): output is not a single element; pass a seed");
  return backward(output, Tensor(output.shape(), 1.0));
}

std::vector<LeafGradient> Graph::backward(Var output, const Tensor& seed) {
  if (!output.valid() || output.graph() != this || output.id() >= nodes_.size()) {
    throw StateError("backward requested before a forward pass produced the output");
  }
  if (seed.shape() != output.shape()) {
    throw InvalidArgument("backward seed shape " + shape_string(seed.shape()) + " differs from output " +
                          shape_string(output.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  grad_buffer(output.id()) = seed;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.requires_grad || !n.backward) continue;
    n.backward(*this, i);
  }

  std::vector<LeafGradient> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (!n.is_parameter) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const LeafGradient& g) { return g.slot == n.slot; });
    if (it == out.end()) {
      out.push_back({n.slot, Tensor(value_of(i).shape(), 0.0)});
      it = out.end() - 1;
    }
    if (n.has_grad) {
      if (it->grad.shape() != n.grad.shape()) throw InvalidArgument("parameter slot reused with a different shape");
      for (std::size_t k = 0; k < n.grad.size(); ++k) it->grad[k] += n.grad[k];
    }
  }
  std::sort(out.begin(), out.end(), [](const LeafGradient& a, const LeafGradient& b) { return a.slot < b.slot; });
  return out;
}

namespace {

Graph& graph_of(Var v, const char* op) {
  if (!v.valid()) throw InvalidArgument(std::string(op) + ": unbound input");
  return *v.graph();
}

void require_rank(Var v, std::size_t rank, const char* op) {
  if (v.value().rank() != rank) {
    throw InvalidArgument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                          shape_string(v.shape()));
  }
}

// Elementwise unary op: forward f(x), backward df(x, y) multiplies the incoming grad.
template <class F, class DF>
Var unary(const char* op, Var x, F f, DF df) {
  Graph& g = graph_of(x, op);
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  const std::size_t xi = x.id();
  return g.record(op, std::move(out), {x}, [xi, df](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& xv = gr.value_of(xi);
    const Tensor& yv = gr.value_of(self);
    Tensor& gx = gr.grad_buffer(xi);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * df(xv[i], yv[i]);
  });
}

// Elementwise binary op with single-element broadcasting on either side.
template <class F, class DA, class DB>
Var binary(const char* op, Var a, Var b, F f, DA da, DB db) {
  Graph& g = graph_of(a, op);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool a_scalar = av.size() == 1 && bv.size() != 1;
  const bool b_scalar = bv.size() == 1 && av.size() != 1;
  if (!a_scalar && !b_scalar && av.shape() != bv.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(av.shape()) + " vs " +
                          shape_string(bv.shape()));
  }
  const Shape shape = a_scalar ? bv.shape() : av.shape();
  const std::size_t n = shape_size(shape);
  Tensor out(shape);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  const std::size_t ai = a.id(), bi = b.id();
  return g.record(op, std::move(out), {a, b}, [=](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& av = gr.value_of(ai);
    const Tensor& bv = gr.value_of(bi);
    const bool ga = gr.requires_grad(ai), gb = gr.requires_grad(bi);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const double x = av[a_scalar ? 0 : i];
      const double y = bv[b_scalar ? 0 : i];
      if (ga) gr.grad_buffer(ai)[a_scalar ? 0 : i] += go[i] * da(x, y);
      if (gb) gr.grad_buffer(bi)[b_scalar ? 0 : i] += go[i] * db(x, y);
    }
  });
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Var neg(Var x) {
  return unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var tanh(Var x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var atanh_clamped(Var x) {
  return unary(
      "atanh", x, [](double v) { return kernels::atanh_clamped(v); },
      [](double v, double) {
        const double c = kernels::clamp_atanh_arg(v);
        return 1.0 / (1.0 - c * c);
      });
}

Var sqrt(Var x) {
  return unary("sqrt", x, [](double v) { return std::sqrt(v); },
               [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var reciprocal(Var x) {
  return unary("reciprocal", x, [](double v) { return 1.0 / v; }, [](double v, double) { return -1.0 / (v * v); });
}

Var relu(Var x) {
  return unary("relu", x, [](double v) { return std::max(v, 0.0); },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var clamp_min(Var x, double lo) {
  return unary("clamp_min", x, [lo](double v) { return std::max(v, lo); },
               [lo](double v, double) { return v > lo ? 1.0 : 0.0; });
}

Var scale(Var x, double a) {
  return unary("scale", x, [a](double v) { return v * a; }, [a](double, double) { return a; });
}

Var add_scalar(Var x, double b) {
  return unary("add_scalar", x, [b](double v) { return v + b; }, [](double, double) { return 1.0; });
}

Var affine(Var x, double a, double b) {
  return unary("affine", x, [a, b](double v) { return a * v + b; }, [a](double, double) { return a; });
}

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

// ---- row-batched -----------------------------------------------------------

Var rowdot(Var x, Var y) {
  Graph& g = graph_of(x, "rowdot");
  require_rank(x, 2, "rowdot");
  if (x.shape() != y.shape()) throw InvalidArgument("rowdot: shape mismatch");
  const Tensor& xv = x.value();
  const Tensor& yv = y.value();
  Tensor out({xv.rows()});
  for (std::size_t r = 0; r < xv.rows(); ++r) out[r] = kernels::dot(xv.row(r), yv.row(r));
  const std::size_t xi = x.id(), yi = y.id();
  return g.record("rowdot", std::move(out), {x, y}, [xi, yi](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& xv = gr.value_of(xi);
    const Tensor& yv = gr.value_of(yi);
    const std::size_t d = xv.cols();
    // Read both inputs before writing: x and y may be the same node.
    if (gr.requires_grad(xi)) {
      Tensor& gx = gr.grad_buffer(xi);
      for (std::size_t r = 0; r < go.size(); ++r)
        for (std::size_t k = 0; k < d; ++k) gx[r * d + k] += go[r] * yv[r * d + k];
    }
    if (gr.requires_grad(yi)) {
      Tensor& gy = gr.grad_buffer(yi);
      for (std::size_t r = 0; r < go.size(); ++r)
        for (std::size_t k = 0; k < d; ++k) gy[r * d + k] += go[r] * xv[r * d + k];
    }
  });
}

Var norm_rows(Var x) {
  Graph& g = graph_of(x, "norm_rows");
  require_rank(x, 2, "norm_rows");
  const Tensor& xv = x.value();
  Tensor out({xv.rows()});
  for (std::size_t r = 0; r < xv.rows(); ++r) out[r] = kernels::norm(xv.row(r));
  const std::size_t xi = x.id();
  return g.record("norm_rows", std::move(out), {x}, [xi](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& xv = gr.value_of(xi);
    const Tensor& nv = gr.value_of(self);
    Tensor& gx = gr.grad_buffer(xi);
    const std::size_t d = xv.cols();
    for (std::size_t r = 0; r < go.size(); ++r) {
      if (nv[r] == 0.0) continue;
      const double s = go[r] / nv[r];
      for (std::size_t k = 0; k < d; ++k) gx[r * d + k] += s * xv[r * d + k];
    }
  });
}

Var scale_rows(Var x, Var s) {
  Graph& g = graph_of(x, "scale_rows");
  require_rank(x, 2, "scale_rows");
  require_rank(s, 1, "scale_rows");
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  if (sv.size() != xv.rows()) throw InvalidArgument("scale_rows: one scale per row required");
  Tensor out(xv.shape());
  const std::size_t d = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t k = 0; k < d; ++k) out[r * d + k] = xv[r * d + k] * sv[r];
  const std::size_t xi = x.id(), si = s.id();
  return g.record("scale_rows", std::move(out), {x, s}, [xi, si, d](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& xv = gr.value_of(xi);
    const Tensor& sv = gr.value_of(si);
    const std::size_t rows = sv.size();
    if (gr.requires_grad(xi)) {
      Tensor& gx = gr.grad_buffer(xi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < d; ++k) gx[r * d + k] += go[r * d + k] * sv[r];
    }
    if (gr.requires_grad(si)) {
      Tensor& gs = gr.grad_buffer(si);
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += go[r * d + k] * xv[r * d + k];
        gs[r] += acc;
      }
    }
  });
}

Var div_rows(Var x, Var s) {
  Graph& g = graph_of(x, "div_rows");
  require_rank(x, 2, "div_rows");
  require_rank(s, 1, "div_rows");
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  if (sv.size() != xv.rows()) throw InvalidArgument("div_rows: one divisor per row required");
  Tensor out(xv.shape());
  const std::size_t d = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t k = 0; k < d; ++k) out[r * d + k] = xv[r * d + k] / sv[r];
  const std::size_t xi = x.id(), si = s.id();
  return g.record("div_rows", std::move(out), {x, s}, [xi, si, d](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& xv = gr.value_of(xi);
    const Tensor& sv = gr.value_of(si);
    const std::size_t rows = sv.size();
    if (gr.requires_grad(xi)) {
      Tensor& gx = gr.grad_buffer(xi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < d; ++k) gx[r * d + k] += go[r * d + k] / sv[r];
    }
    if (gr.requires_grad(si)) {
      Tensor& gs = gr.grad_buffer(si);
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += go[r * d + k] * xv[r * d + k];
        gs[r] -= acc / (sv[r] * sv[r]);
      }
    }
  });
}

Var col_sum(Var x) {
  Graph& g = graph_of(x, "col_sum");
  require_rank(x, 2, "col_sum");
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  Tensor out({1, d}, 0.0);
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t k = 0; k < d; ++k) out[k] += xv[r * d + k];
  const std::size_t xi = x.id();
  return g.record("col_sum", std::move(out), {x}, [xi, d](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    Tensor& gx = gr.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i % d];
  });
}

Var sum(Var x) {
  Graph& g = graph_of(x, "sum");
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (double v : xv.values()) acc += v;
  const std::size_t xi = x.id();
  return g.record("sum", Tensor::scalar(acc), {x}, [xi](Graph& gr, std::size_t self) {
    const double go = gr.grad_of(self)[0];
    Tensor& gx = gr.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go;
  });
}

Var mean(Var x) {
  Graph& g = graph_of(x, "mean");
  const Tensor& xv = x.value();
  if (xv.empty()) throw InvalidArgument("mean: empty tensor");
  double acc = 0.0;
  for (double v : xv.values()) acc += v;
  const double n = static_cast<double>(xv.size());
  const std::size_t xi = x.id();
  return g.record("mean", Tensor::scalar(acc / n), {x}, [xi, n](Graph& gr, std::size_t self) {
    const double go = gr.grad_of(self)[0] / n;
    Tensor& gx = gr.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go;
  });
}

Var gather_rows(Var x, std::vector<std::size_t> rows) {
  Graph& g = graph_of(x, "gather_rows");
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  Shape shape = xv.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) throw InvalidArgument("gather_rows: row index out of range");
    std::copy_n(xv.row(rows[i]).begin(), d, out.values().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  const std::size_t xi = x.id();
  return g.record("gather_rows", std::move(out), {x}, [xi, d, rows = std::move(rows)](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    Tensor& gx = gr.grad_buffer(xi);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < d; ++k) gx[rows[i] * d + k] += go[i * d + k];
  });
}

Var repeat_rows(Var x, std::size_t times) {
  Graph& g = graph_of(x, "repeat_rows");
  require_rank(x, 2, "repeat_rows");
  const Tensor& xv = x.value();
  if (xv.rows() != 1) throw InvalidArgument("repeat_rows: expects a single row");
  const std::size_t d = xv.cols();
  Tensor out({times, d});
  for (std::size_t r = 0; r < times; ++r) std::copy_n(xv.values().begin(), d, out.row(r).begin());
  const std::size_t xi = x.id();
  return g.record("repeat_rows", std::move(out), {x}, [xi, d](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    Tensor& gx = gr.grad_buffer(xi);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i % d] += go[i];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows: nothing to concatenate");
  Graph& g = graph_of(parts.front(), "concat_rows");
  Shape shape = parts.front().shape();
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size() || !std::equal(s.begin() + 1, s.end(), shape.begin() + 1)) {
      throw InvalidArgument("concat_rows: trailing extents differ");
    }
    offsets.push_back(rows * p.value().cols());
    rows += s[0];
  }
  shape[0] = rows;
  Tensor out(shape);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& pv = parts[i].value();
    std::copy(pv.values().begin(), pv.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(offsets[i]));
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return g.record("concat_rows", std::move(out), parts, [ids, offsets](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!gr.requires_grad(ids[i])) continue;
      Tensor& gp = gr.grad_buffer(ids[i]);
      for (std::size_t k = 0; k < gp.size(); ++k) gp[k] += go[offsets[i] + k];
    }
  });
}

Var reshape(Var x, Shape shape) {
  Graph& g = graph_of(x, "reshape");
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t xi = x.id();
  return g.record("reshape", std::move(out), {x}, [xi](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    Tensor& gx = gr.grad_buffer(xi);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
  });
}

Var softmax_rows(Var x) {
  Graph& g = graph_of(x, "softmax_rows");
  require_rank(x, 2, "softmax_rows");
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < xv.rows(); ++r) kernels::softmax(xv.row(r), out.row(r));
  const std::size_t xi = x.id();
  return g.record("softmax_rows", std::move(out), {x}, [xi](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& y = gr.value_of(self);
    Tensor& gx = gr.grad_buffer(xi);
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double inner = 0.0;
      for (std::size_t k = 0; k < cols; ++k) inner += go[r * cols + k] * y[r * cols + k];
      for (std::size_t k = 0; k < cols; ++k) gx[r * cols + k] += y[r * cols + k] * (go[r * cols + k] - inner);
    }
  });
}

Var outer_sub(Var a, Var b) {
  Graph& g = graph_of(a, "outer_sub");
  require_rank(a, 1, "outer_sub");
  require_rank(b, 1, "outer_sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t p = av.size(), q = bv.size();
  Tensor out({p, q});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out[i * q + j] = bv[j] - av[i];
  const std::size_t ai = a.id(), bi = b.id();
  return g.record("outer_sub", std::move(out), {a, b}, [ai, bi, p, q](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    if (gr.requires_grad(ai)) {
      Tensor& ga = gr.grad_buffer(ai);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) ga[i] -= go[i * q + j];
    }
    if (gr.requires_grad(bi)) {
      Tensor& gb = gr.grad_buffer(bi);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) gb[j] += go[i * q + j];
    }
  });
}

Var ball_project_rows(Var x, double c) {
  Graph& g = graph_of(x, "ball_project_rows");
  require_rank(x, 2, "ball_project_rows");
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  std::vector<double> scales(xv.rows(), 1.0);
  std::vector<bool> clamped(xv.rows(), false);
  const double bound = 1.0 - kernels::kBallEpsilon;
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    clamped[r] = c > 0.0 && c * kernels::dot(xv.row(r), xv.row(r)) >= bound * bound;
    scales[r] = kernels::project_to_ball(xv.row(r), c, out.row(r));
  }
  const std::size_t xi = x.id();
  return g.record("ball_project_rows", std::move(out), {x},
                  [xi, scales = std::move(scales), clamped = std::move(clamped)](Graph& gr, std::size_t self) {
                    const Tensor& go = gr.grad_of(self);
                    const Tensor& xv = gr.value_of(xi);
                    Tensor& gx = gr.grad_buffer(xi);
                    const std::size_t d = xv.cols();
                    for (std::size_t r = 0; r < scales.size(); ++r) {
                      const double* xr = xv.values().data() + r * d;
                      const double* gr_ = go.values().data() + r * d;
                      if (!clamped[r]) {
                        for (std::size_t k = 0; k < d; ++k) gx[r * d + k] += gr_[k];
                        continue;
                      }
                      // y = m x / |x|  =>  dy/dx = s (I - x x^T / |x|^2)
                      double n2 = 0.0, xg = 0.0;
                      for (std::size_t k = 0; k < d; ++k) {
                        n2 += xr[k] * xr[k];
                        xg += xr[k] * gr_[k];
                      }
                      for (std::size_t k = 0; k < d; ++k) gx[r * d + k] += scales[r] * (gr_[k] - xr[k] * xg / n2);
                    }
                  });
}

// ---- linear ----------------------------------------------------------------

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, "matmul");
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  if (bv.shape()[0] != k) {
    throw InvalidArgument("matmul: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  Tensor out({m, n});
  kernels::matmul(av.values(), bv.values(), m, k, n, out.values());
  const std::size_t ai = a.id(), bi = b.id();
  return g.record("matmul", std::move(out), {a, b}, [ai, bi, m, k, n](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& av = gr.value_of(ai);
    const Tensor& bv = gr.value_of(bi);
    if (gr.requires_grad(ai)) {  // dA = G B^T
      Tensor& ga = gr.grad_buffer(ai);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (gr.requires_grad(bi)) {  // dB = A^T G
      Tensor& gb = gr.grad_buffer(bi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double a_ip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += a_ip * go[i * n + j];
        }
    }
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = graph_of(a, "matmul_nt");
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[0];
  if (bv.shape()[1] != k) {
    throw InvalidArgument("matmul_nt: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()) + "^T");
  }
  Tensor out({m, n});
  kernels::matmul_nt(av.values(), bv.values(), m, k, n, out.values());
  const std::size_t ai = a.id(), bi = b.id();
  return g.record("matmul_nt", std::move(out), {a, b}, [ai, bi, m, k, n](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& av = gr.value_of(ai);
    const Tensor& bv = gr.value_of(bi);
    if (gr.requires_grad(ai)) {  // dA = G B
      Tensor& ga = gr.grad_buffer(ai);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = go[i * n + j];
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gij * bv[j * k + p];
        }
    }
    if (gr.requires_grad(bi)) {  // dB = G^T A
      Tensor& gb = gr.grad_buffer(bi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = go[i * n + j];
          for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += gij * av[i * k + p];
        }
    }
  });
}

Var conv1d(Var x, Var w, Var bias) {
  Graph& g = graph_of(x, "conv1d");
  require_rank(x, 2, "conv1d");
  require_rank(w, 3, "conv1d");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const std::size_t t = xv.shape()[0], d_in = xv.shape()[1];
  const std::size_t width = wv.shape()[0], d_out = wv.shape()[2];
  if (wv.shape()[1] != d_in) throw InvalidArgument("conv1d: filter input width differs from token width");
  if (width == 0 || width > t) throw InvalidArgument("conv1d: window longer than the sequence");
  const bool has_bias = bias.valid();
  if (has_bias && bias.value().size() != d_out) throw InvalidArgument("conv1d: bias width mismatch");
  const std::size_t rows = t - width + 1;
  Tensor out({rows, d_out});
  const std::span<const double> bv = has_bias ? bias.value().values() : std::span<const double>();
  for (std::size_t i = 0; i < rows; ++i) kernels::conv1d_row(xv.values(), d_in, i, width, wv.values(), d_out, bv, out.row(i));
  const std::size_t xi = x.id(), wi = w.id();
  const std::size_t bi = has_bias ? bias.id() : 0;
  auto backward = [=](Graph& gr, std::size_t self) {
    const Tensor& go = gr.grad_of(self);
    const Tensor& xv = gr.value_of(xi);
    const Tensor& wv = gr.value_of(wi);
    const bool gx_needed = gr.requires_grad(xi);
    const bool gw_needed = gr.requires_grad(wi);
    Tensor* gx = gx_needed ? &gr.grad_buffer(xi) : nullptr;
    Tensor* gw = gw_needed ? &gr.grad_buffer(wi) : nullptr;
    for (std::size_t i = 0; i < rows; ++i) {
      const double* gorow = go.values().data() + i * d_out;
      for (std::size_t j = 0; j < width; ++j) {
        for (std::size_t k = 0; k < d_in; ++k) {
          const std::size_t wbase = (j * d_in + k) * d_out;
          const std::size_t xidx = (i + j) * d_in + k;
          if (gx) {
            double acc = 0.0;
            for (std::size_t o = 0; o < d_out; ++o) acc += gorow[o] * wv[wbase + o];
            (*gx)[xidx] += acc;
          }
          if (gw) {
            const double xval = xv[xidx];
            for (std::size_t o = 0; o < d_out; ++o) (*gw)[wbase + o] += xval * gorow[o];
          }
        }
      }
    }
    if (has_bias && gr.requires_grad(bi)) {
      Tensor& gb = gr.grad_buffer(bi);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t o = 0; o < d_out; ++o) gb[o] += go[i * d_out + o];
    }
  };
  if (has_bias) return g.record("conv1d", std::move(out), {x, w, bias}, backward);
  return g.record("conv1d", std::move(out), {x, w}, backward);
}

Var weighted_layer_sum(Var h, Var alpha) {
  Graph& g = graph_of(h, "weighted_layer_sum");
  require_rank(h, 3, "weighted_layer_sum");
  require_rank(alpha, 2, "weighted_layer_sum");
  const Tensor& hv = h.value();
  const Tensor& av = alpha.value();
  const std::size_t m = hv.shape()[0], layers = hv.shape()[1], d = hv.shape()[2];
  if (av.shape()[0] != m || av.shape()[1] != layers) {
    throw InvalidArgument("weighted_layer_sum: weights " + shape_string(av.shape()) + " vs embeddings " +
                          shape_string(hv.shape()));
  }
  Tensor out({m, d});
  for (std::size_t i = 0; i < m; ++i) {
    kernels::weighted_layer_sum(hv.values().subspan(i * layers * d, layers * d), av.row(i), d, out.row(i));
  }
  const std::size_t hi = h.id(), ai = alpha.id();
  return g.record("weighted_layer_sum", std::move(out), {h, alpha},
                  [hi, ai, m, layers, d](Graph& gr, std::size_t self) {
                    const Tensor& go = gr.grad_of(self);
                    const Tensor& hv = gr.value_of(hi);
                    const Tensor& av = gr.value_of(ai);
                    if (gr.requires_grad(ai)) {
                      Tensor& ga = gr.grad_buffer(ai);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t l = 0; l < layers; ++l) {
                          double acc = 0.0;
                          for (std::size_t k = 0; k < d; ++k) acc += go[i * d + k] * hv[(i * layers + l) * d + k];
                          ga[i * layers + l] += acc;
                        }
                    }
                    if (gr.requires_grad(hi)) {
                      Tensor& gh = gr.grad_buffer(hi);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t l = 0; l < layers; ++l)
                          for (std::size_t k = 0; k < d; ++k)
                            gh[(i * layers + l) * d + k] += av[i * layers + l] * go[i * d + k];
                    }
                  });
}

}  // namespace hypermatch::autodiff
