#pragma once

// Allocation-free numeric kernels over spans.
//
// The eager hyperbolic API and the autodiff graph both route their forward
// arithmetic through these functions, in the same operation order, so that a
// graph evaluation reproduces the eager result bit-for-bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

namespace hypermatch::kernels {

// Every ball-valued result is pulled back to norm (1 - kBallEpsilon)/sqrt(c).
inline constexpr double kBallEpsilon = 1e-5;
// arctanh arguments are clamped to [0, kAtanhLimit].
inline constexpr double kAtanhLimit = 1.0 - 1e-12;
// Norms used as divisors are floored here.
inline constexpr double kMinNorm = 1e-15;
// Floor for 1 - c|x|^2 under a square root in the Klein model.
inline constexpr double kMinLorentzGap = 1e-15;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

inline double clamp_atanh_arg(double x) noexcept { return std::clamp(x, 0.0, kAtanhLimit); }

inline double atanh_clamped(double x) noexcept { return std::atanh(clamp_atanh_arg(x)); }

inline void scale(std::span<const double> x, double s, std::span<double> out) noexcept {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * s;
}

/// Largest admissible norm inside the ball of curvature c > 0.
inline double max_ball_norm(double c) noexcept { return (1.0 - kBallEpsilon) / std::sqrt(c); }

/// Writes the ball projection of `x` into `out` (may alias). Returns the
/// applied scale factor, 1.0 when the point was already inside.
inline double project_to_ball(std::span<const double> x, double c, std::span<double> out) noexcept {
  if (c <= 0.0) {
    if (out.data() != x.data()) std::copy(x.begin(), x.end(), out.begin());
    return 1.0;
  }
  const double n2 = dot(x, x);
  const double bound = 1.0 - kBallEpsilon;
  if (c * n2 >= bound * bound) {
    const double s = max_ball_norm(c) / std::sqrt(n2);
    scale(x, s, out);
    return s;
  }
  if (out.data() != x.data()) std::copy(x.begin(), x.end(), out.begin());
  return 1.0;
}

struct MobiusCoefficients {
  double a;    // multiplies x
  double b;    // multiplies y
  double den;  // common denominator
};

inline MobiusCoefficients mobius_coefficients(double xy, double x2, double y2, double c) noexcept {
  const double t = 1.0 + (2.0 * c) * xy;
  return {t + c * y2, 1.0 + (-c) * x2, t + ((c * c) * x2) * y2};
}

/// x (+)_c y, projected. `out` must not alias x or y.
inline void mobius_add(std::span<const double> x, std::span<const double> y, double c,
                       std::span<double> out) noexcept {
  if (c == 0.0) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return;
  }
  const auto k = mobius_coefficients(dot(x, y), dot(x, x), dot(y, y), c);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] * k.a + y[i] * k.b) / k.den;
  project_to_ball(out, c, out);
}

/// Exponential map at the origin, projected.
inline void exp0(std::span<const double> v, double c, std::span<double> out) noexcept {
  if (c == 0.0) {
    if (out.data() != v.data()) std::copy(v.begin(), v.end(), out.begin());
    return;
  }
  const double n = std::max(norm(v), kMinNorm);
  const double sn = std::sqrt(c) * n;
  const double s = std::tanh(sn) / sn;
  scale(v, s, out);
  project_to_ball(out, c, out);
}

/// Logarithmic map at the origin.
inline void log0(std::span<const double> y, double c, std::span<double> out) noexcept {
  if (c == 0.0) {
    if (out.data() != y.data()) std::copy(y.begin(), y.end(), out.begin());
    return;
  }
  const double n = std::max(norm(y), kMinNorm);
  const double sn = std::sqrt(c) * n;
  const double s = atanh_clamped(sn) / sn;
  scale(y, s, out);
}

/// Möbius matrix-vector product given the already-computed Euclidean image
/// `mx` = M x. Writes the projected ball point into `out` (may alias mx).
inline void mobius_matvec_from_image(std::span<const double> x, std::span<const double> mx, double c,
                                     std::span<double> out) noexcept {
  if (c == 0.0) {
    if (out.data() != mx.data()) std::copy(mx.begin(), mx.end(), out.begin());
    return;
  }
  const double sqrt_c = std::sqrt(c);
  const double mxn = std::max(norm(mx), kMinNorm);
  const double xn = std::max(norm(x), kMinNorm);
  const double u = (mxn / xn) * atanh_clamped(sqrt_c * xn);
  const double s = std::tanh(u) * (1.0 / sqrt_c);
  scale(mx, s / mxn, out);
  project_to_ball(out, c, out);
}

/// Poincaré -> Klein coordinates. `out` may alias x.
inline void to_klein(std::span<const double> x, double c, std::span<double> out) noexcept {
  const double den = 1.0 + c * dot(x, x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (2.0 * x[i]) / den;
}

/// Klein -> Poincaré coordinates. `out` may alias k.
inline void from_klein(std::span<const double> k, double c, std::span<double> out) noexcept {
  const double gap = std::max(1.0 + (-c) * dot(k, k), 0.0);
  const double q = 1.0 + std::sqrt(gap);
  for (std::size_t i = 0; i < k.size(); ++i) out[i] = k[i] / q;
}

/// Lorentz factor of a Klein-model point.
inline double lorentz_factor(std::span<const double> k, double c) noexcept {
  return 1.0 / std::sqrt(std::max(1.0 + (-c) * dot(k, k), kMinLorentzGap));
}

/// Numerically stable softmax of one row. `out` may alias x.
inline void softmax(std::span<const double> x, std::span<double> out) noexcept {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    s += out[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = out[i] / s;
}

/// C[m x n] = A[m x k] B[k x n], row-major.
inline void matmul(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k,
                   std::size_t n, std::span<double> c) noexcept {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// C[m x n] = A[m x k] B[n x k]^T, row-major.
inline void matmul_nt(std::span<const double> a, std::span<const double> b, std::size_t m, std::size_t k,
                      std::size_t n, std::span<double> c) noexcept {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot(a.subspan(i * k, k), b.subspan(j * k, k));
  }
}

/// One output row of a width-`width` convolution: the window starts at row
/// `start` of x[T x d_in], weights are laid out [width x d_in x d_out].
inline void conv1d_row(std::span<const double> x, std::size_t d_in, std::size_t start, std::size_t width,
                       std::span<const double> w, std::size_t d_out, std::span<const double> bias,
                       std::span<double> out) noexcept {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < width; ++j) {
    const double* xrow = x.data() + (start + j) * d_in;
    for (std::size_t k = 0; k < d_in; ++k) {
      const double xv = xrow[k];
      const double* wrow = w.data() + (j * d_in + k) * d_out;
      for (std::size_t o = 0; o < d_out; ++o) out[o] += xv * wrow[o];
    }
  }
  if (!bias.empty()) {
    for (std::size_t o = 0; o < d_out; ++o) out[o] = out[o] + bias[o];
  }
}

/// out[d] = sum_l alpha[l] * h[l, :] over a layer-major block h[L x d].
inline void weighted_layer_sum(std::span<const double> h, std::span<const double> alpha, std::size_t d,
                               std::span<double> out) noexcept {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t l = 0; l < alpha.size(); ++l) {
    const double a = alpha[l];
    const double* hrow = h.data() + l * d;
    for (std::size_t k = 0; k < d; ++k) out[k] += a * hrow[k];
  }
}

}  // namespace hypermatch::kernels
