#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hypermatch/tensor.hpp"

namespace hypermatch {

/// Curvature parameter of the Poincaré ball. Zero selects the Euclidean
/// limit paths (vector addition, doubled Euclidean distance, identity maps).
class Curvature {
 public:
  explicit Curvature(double c = 1.0);

  double value() const noexcept { return c_; }
  double sqrt() const noexcept;
  bool is_euclidean() const noexcept { return c_ == 0.0; }

  friend bool operator==(Curvature, Curvature) = default;

 private:
  double c_;
};

/// A point of the open ball c|x|^2 < 1.
class PoincarePoint {
 public:
  /// Throws InvalidArgument unless c|coords|^2 < 1.
  PoincarePoint(std::vector<double> coords, Curvature c);

  static PoincarePoint origin(std::size_t dim, Curvature c);

  std::span<const double> coords() const noexcept { return coords_; }
  std::size_t dim() const noexcept { return coords_.size(); }
  Curvature curvature() const noexcept { return c_; }
  double operator[](std::size_t i) const { return coords_[i]; }

  /// lambda_x = 2 / (1 - c|x|^2).
  double conformal_factor() const noexcept;

 private:
  std::vector<double> coords_;
  Curvature c_;
};

/// A tangent vector at `base`.
struct TangentVector {
  std::vector<double> coords;
  PoincarePoint base;

  TangentVector(std::vector<double> v, PoincarePoint at);
};

/// A point in Klein coordinates, c|x|^2 < 1.
class KleinPoint {
 public:
  KleinPoint(std::vector<double> coords, Curvature c);

  std::span<const double> coords() const noexcept { return coords_; }
  std::size_t dim() const noexcept { return coords_.size(); }
  Curvature curvature() const noexcept { return c_; }

  /// gamma = 1 / sqrt(1 - c|x|^2).
  double lorentz_factor() const noexcept;

 private:
  std::vector<double> coords_;
  Curvature c_;
};

/// Rescales x onto the (1 - 1e-5)-shrunk ball if it lies on or beyond it.
PoincarePoint project_to_ball(std::span<const double> x, Curvature c);

PoincarePoint mobius_add(const PoincarePoint& x, const PoincarePoint& y);

/// M (x)_c x for a rank-2 tensor M of shape [m, n].
PoincarePoint mobius_matvec(const Tensor& m, const PoincarePoint& x);

/// Geodesic distance; requires c > 0 (see euclidean_distance_limit).
double poincare_distance(const PoincarePoint& x, const PoincarePoint& y);

/// The c -> 0 limit of the distance, 2|x - y|.
double euclidean_distance_limit(std::span<const double> x, std::span<const double> y);

PoincarePoint exp_map(const PoincarePoint& base, const TangentVector& v);
TangentVector log_map(const PoincarePoint& base, const PoincarePoint& y);

/// exp/log at the origin on raw coordinates; the encoders use these.
PoincarePoint exp_map0(std::span<const double> v, Curvature c);
std::vector<double> log_map0(const PoincarePoint& y);

KleinPoint poincare_to_klein(const PoincarePoint& x);
PoincarePoint klein_to_poincare(const KleinPoint& x);

/// Einstein midpoint computed in Klein coordinates and mapped back.
PoincarePoint hyper_average(std::span<const PoincarePoint> points);

/// Euclidean mean of raw vectors.
std::vector<double> euclidean_average(std::span<const std::vector<double>> points);

}  // namespace hypermatch
