#pragma once

// Small helpers shared by the test binaries.

#include <cmath>
#include <span>
#include <vector>

#include "hypermatch/hyperbolic.hpp"
#include "hypermatch/kernels.hpp"
#include "hypermatch/rng.hpp"

namespace hypermatch::testing {

/// Uniform direction, norm uniform in [0, max_norm).
inline std::vector<double> random_vector(Rng& rng, std::size_t dim, double max_norm) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.gaussian(0.0, 1.0);
  const double n = kernels::norm(v);
  const double target = max_norm * rng.uniform();
  for (double& x : v) x = x / n * target;
  return v;
}

inline PoincarePoint random_point(Rng& rng, std::size_t dim, double max_norm, double c = 1.0) {
  return PoincarePoint(random_vector(rng, dim, max_norm / std::sqrt(c)), Curvature(c));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace hypermatch::testing
