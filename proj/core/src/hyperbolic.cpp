#include "hypermatch/hyperbolic.hpp"

#include <cmath>
#include <string>

#include "hypermatch/error.hpp"
#include "hypermatch/kernels.hpp"

namespace hypermatch {
namespace {

void require_same_space(const PoincarePoint& x, const PoincarePoint& y, const char* op) {
  if (x.dim() != y.dim()) {
    throw InvalidArgument(std::string(op) + ": dimension mismatch (" + std::to_string(x.dim()) + " vs " +
                          std::to_string(y.dim()) + ")");
  }
  if (x.curvature() != y.curvature()) {
    throw InvalidArgument(std::string(op) + ": curvature mismatch");
  }
}

bool inside_ball(std::span<const double> x, Curvature c) {
  return c.value() * kernels::dot(x, x) < 1.0;
}

}  // namespace

Curvature::Curvature(double c) : c_(c) {
  if (!(c >= 0.0) || !std::isfinite(c)) {
    throw InvalidArgument("curvature must be a finite non-negative number, got " + std::to_string(c));
  }
}

double Curvature::sqrt() const noexcept { return std::sqrt(c_); }

PoincarePoint::PoincarePoint(std::vector<double> coords, Curvature c) : coords_(std::move(coords)), c_(c) {
  if (!inside_ball(coords_, c_)) throw InvalidArgument("point lies outside the Poincare ball");
}

PoincarePoint PoincarePoint::origin(std::size_t dim, Curvature c) {
  return PoincarePoint(std::vector<double>(dim, 0.0), c);
}

double PoincarePoint::conformal_factor() const noexcept {
  return 2.0 / (1.0 - c_.value() * kernels::dot(coords_, coords_));
}

TangentVector::TangentVector(std::vector<double> v, PoincarePoint at) : coords(std::move(v)), base(std::move(at)) {
  if (coords.size() != base.dim()) throw InvalidArgument("tangent vector dimension differs from its base point");
}

KleinPoint::KleinPoint(std::vector<double> coords, Curvature c) : coords_(std::move(coords)), c_(c) {
  if (!inside_ball(coords_, c_)) throw InvalidArgument("point lies outside the Klein disk");
}

double KleinPoint::lorentz_factor() const noexcept { return kernels::lorentz_factor(coords_, c_.value()); }

PoincarePoint project_to_ball(std::span<const double> x, Curvature c) {
  std::vector<double> out(x.size());
  kernels::project_to_ball(x, c.value(), out);
  return PoincarePoint(std::move(out), c);
}

PoincarePoint mobius_add(const PoincarePoint& x, const PoincarePoint& y) {
  require_same_space(x, y, "mobius_add");
  std::vector<double> out(x.dim());
  kernels::mobius_add(x.coords(), y.coords(), x.curvature().value(), out);
  return PoincarePoint(std::move(out), x.curvature());
}

PoincarePoint mobius_matvec(const Tensor& m, const PoincarePoint& x) {
  if (m.rank() != 2 || m.shape()[1] != x.dim()) {
    throw InvalidArgument("mobius_matvec: matrix " + shape_string(m.shape()) + " cannot multiply a vector of dim " +
                          std::to_string(x.dim()));
  }
  const std::size_t rows = m.shape()[0];
  std::vector<double> mx(rows);
  kernels::matmul_nt(x.coords(), m.values(), 1, x.dim(), rows, mx);
  kernels::mobius_matvec_from_image(x.coords(), mx, x.curvature().value(), mx);
  return PoincarePoint(std::move(mx), x.curvature());
}

double poincare_distance(const PoincarePoint& x, const PoincarePoint& y) {
  require_same_space(x, y, "poincare_distance");
  const double c = x.curvature().value();
  if (c == 0.0) {
    throw InvalidArgument("poincare_distance: c = 0 has no hyperbolic distance; use euclidean_distance_limit");
  }
  std::vector<double> neg_x(x.dim());
  kernels::scale(x.coords(), -1.0, neg_x);
  std::vector<double> w(x.dim());
  kernels::mobius_add(neg_x, y.coords(), c, w);
  const double sqrt_c = std::sqrt(c);
  return (2.0 / sqrt_c) * kernels::atanh_clamped(sqrt_c * kernels::norm(w));
}

double euclidean_distance_limit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("euclidean_distance_limit: dimension mismatch");
  std::vector<double> diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - y[i];
  return 2.0 * kernels::norm(diff);
}

PoincarePoint exp_map(const PoincarePoint& base, const TangentVector& v) {
  require_same_space(base, v.base, "exp_map");
  const double c = base.curvature().value();
  const double n = kernels::norm(v.coords);
  if (n == 0.0) return base;
  std::vector<double> out(base.dim());
  if (c == 0.0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = base[i] + v.coords[i];
    return PoincarePoint(std::move(out), base.curvature());
  }
  const double sqrt_c = std::sqrt(c);
  const double lambda = base.conformal_factor();
  std::vector<double> step(base.dim());
  kernels::scale(v.coords, std::tanh(sqrt_c * lambda * n / 2.0) / (sqrt_c * n), step);
  kernels::project_to_ball(step, c, step);
  kernels::mobius_add(base.coords(), step, c, out);
  return PoincarePoint(std::move(out), base.curvature());
}

TangentVector log_map(const PoincarePoint& base, const PoincarePoint& y) {
  require_same_space(base, y, "log_map");
  const double c = base.curvature().value();
  std::vector<double> out(base.dim(), 0.0);
  if (c == 0.0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[i] - base[i];
    return TangentVector(std::move(out), base);
  }
  std::vector<double> neg_base(base.dim());
  kernels::scale(base.coords(), -1.0, neg_base);
  std::vector<double> w(base.dim());
  kernels::mobius_add(neg_base, y.coords(), c, w);
  const double n = kernels::norm(w);
  if (n == 0.0) return TangentVector(std::move(out), base);
  const double sqrt_c = std::sqrt(c);
  const double coef = 2.0 / (sqrt_c * base.conformal_factor()) * kernels::atanh_clamped(sqrt_c * n) / n;
  kernels::scale(w, coef, out);
  return TangentVector(std::move(out), base);
}

PoincarePoint exp_map0(std::span<const double> v, Curvature c) {
  std::vector<double> out(v.size());
  kernels::exp0(v, c.value(), out);
  return PoincarePoint(std::move(out), c);
}

std::vector<double> log_map0(const PoincarePoint& y) {
  std::vector<double> out(y.dim());
  kernels::log0(y.coords(), y.curvature().value(), out);
  return out;
}

KleinPoint poincare_to_klein(const PoincarePoint& x) {
  std::vector<double> out(x.dim());
  kernels::to_klein(x.coords(), x.curvature().value(), out);
  return KleinPoint(std::move(out), x.curvature());
}

PoincarePoint klein_to_poincare(const KleinPoint& x) {
  std::vector<double> out(x.dim());
  kernels::from_klein(x.coords(), x.curvature().value(), out);
  kernels::project_to_ball(out, x.curvature().value(), out);
  return PoincarePoint(std::move(out), x.curvature());
}

PoincarePoint hyper_average(std::span<const PoincarePoint> points) {
  if (points.empty()) throw InvalidArgument("hyper_average: empty point list");
  const std::size_t dim = points.front().dim();
  const Curvature curvature = points.front().curvature();
  const double c = curvature.value();
  std::vector<double> num(dim, 0.0);
  std::vector<double> klein(dim);
  double den = 0.0;
  for (const auto& p : points) {
    require_same_space(points.front(), p, "hyper_average");
    kernels::to_klein(p.coords(), c, klein);
    const double gamma = kernels::lorentz_factor(klein, c);
    for (std::size_t i = 0; i < dim; ++i) num[i] += klein[i] * gamma;
    den += gamma;
  }
  for (std::size_t i = 0; i < dim; ++i) num[i] = num[i] / den;
  kernels::from_klein(num, c, num);
  kernels::project_to_ball(num, c, num);
  return PoincarePoint(std::move(num), curvature);
}

std::vector<double> euclidean_average(std::span<const std::vector<double>> points) {
  if (points.empty()) throw InvalidArgument("euclidean_average: empty point list");
  std::vector<double> out(points.front().size(), 0.0);
  for (const auto& p : points) {
    if (p.size() != out.size()) throw InvalidArgument("euclidean_average: dimension mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  }
  for (double& v : out) v /= static_cast<double>(points.size());
  return out;
}

}  // namespace hypermatch
