#include "hypermatch/hyperbolic_graph.hpp"

#include <cmath>

#include "hypermatch/error.hpp"
#include "hypermatch/kernels.hpp"

namespace hypermatch::autodiff {

Var mobius_add_rows(Var x, Var y, double c) {
  if (c == 0.0) return add(x, y);
  const Var xy = rowdot(x, y);
  const Var x2 = rowdot(x, x);
  const Var y2 = rowdot(y, y);
  const Var t = affine(xy, 2.0 * c, 1.0);
  const Var a = add(t, scale(y2, c));
  const Var b = affine(x2, -c, 1.0);
  const Var den = add(t, mul(scale(x2, c * c), y2));
  const Var num = add(scale_rows(x, a), scale_rows(y, b));
  return ball_project_rows(div_rows(num, den), c);
}

Var exp0_rows(Var v, double c) {
  if (c == 0.0) return v;
  const Var sn = scale(clamp_min(norm_rows(v), kernels::kMinNorm), std::sqrt(c));
  const Var s = div(tanh(sn), sn);
  return ball_project_rows(scale_rows(v, s), c);
}

Var log0_rows(Var y, double c) {
  if (c == 0.0) return y;
  const Var sn = scale(clamp_min(norm_rows(y), kernels::kMinNorm), std::sqrt(c));
  const Var s = div(atanh_clamped(sn), sn);
  return scale_rows(y, s);
}

Var mobius_matvec_rows(Var x, Var w, double c) {
  const Var mx = matmul(x, w);
  if (c == 0.0) return mx;
  const double sqrt_c = std::sqrt(c);
  const Var mxn = clamp_min(norm_rows(mx), kernels::kMinNorm);
  const Var xn = clamp_min(norm_rows(x), kernels::kMinNorm);
  const Var u = mul(div(mxn, xn), atanh_clamped(scale(xn, sqrt_c)));
  const Var s = scale(tanh(u), 1.0 / sqrt_c);
  return ball_project_rows(scale_rows(mx, div(s, mxn)), c);
}

Var distance_rows(Var x, Var y, double c) {
  if (c == 0.0) return scale(norm_rows(sub(x, y)), 2.0);
  const double sqrt_c = std::sqrt(c);
  const Var w = mobius_add_rows(neg(x), y, c);
  return scale(atanh_clamped(scale(norm_rows(w), sqrt_c)), 2.0 / sqrt_c);
}

Var to_klein_rows(Var x, double c) {
  const Var den = affine(rowdot(x, x), c, 1.0);
  return div_rows(scale(x, 2.0), den);
}

Var from_klein_rows(Var k, double c) {
  const Var gap = clamp_min(affine(rowdot(k, k), -c, 1.0), 0.0);
  const Var q = add_scalar(sqrt(gap), 1.0);
  return div_rows(k, q);
}

Var einstein_midpoint(Var points, double c) {
  if (points.value().rank() != 2 || points.rows() == 0) {
    throw InvalidArgument("einstein_midpoint: expects a non-empty [M, d] batch");
  }
  const Var k = to_klein_rows(points, c);
  const Var gamma = reciprocal(sqrt(clamp_min(affine(rowdot(k, k), -c, 1.0), kernels::kMinLorentzGap)));
  const Var mid = div(col_sum(scale_rows(k, gamma)), sum(gamma));
  return ball_project_rows(from_klein_rows(mid, c), c);
}

}  // namespace hypermatch::autodiff
