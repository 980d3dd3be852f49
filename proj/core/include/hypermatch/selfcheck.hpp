#pragma once

// Property suites shared by the `selftest` command and the test binaries:
// the geometry invariants of the Poincaré-ball kernel and the
// finite-difference check of the training gradients.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "hypermatch/hyperbolic.hpp"
#include "hypermatch/model.hpp"
#include "hypermatch/training.hpp"

namespace hypermatch {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// The geometry operations exercised by the suite. library_ops() binds the
/// real implementations; faulty_ops() swaps in deliberately broken ones so
/// the suite's sensitivity can be demonstrated.
struct GeometryOps {
  std::function<PoincarePoint(const PoincarePoint&, const PoincarePoint&)> mobius_add;
  std::function<PoincarePoint(const Tensor&, const PoincarePoint&)> mobius_matvec;
  std::function<double(const PoincarePoint&, const PoincarePoint&)> distance;
  std::function<PoincarePoint(const PoincarePoint&, const TangentVector&)> exp_map;
  std::function<TangentVector(const PoincarePoint&, const PoincarePoint&)> log_map;
  std::function<KleinPoint(const PoincarePoint&)> to_klein;
  std::function<PoincarePoint(const KleinPoint&)> from_klein;
  std::function<PoincarePoint(std::span<const PoincarePoint>)> hyper_average;
};

GeometryOps library_ops();

/// Known faults: "mobius-sign" (flips the sign of the c|x|^2 term in Möbius
/// addition, and everything built on it), "klein-denominator", and
/// "distance-scale". Throws InvalidArgument for anything else.
GeometryOps faulty_ops(std::string_view fault);
std::vector<std::string> fault_names();

std::vector<PropertyResult> run_geometry_suite(const GeometryOps& ops, std::uint64_t seed);

struct TensorGradientError {
  std::string name;
  double max_abs_error = 0.0;
  double scale = 0.0;           // max(|analytic|, |numeric|) over the tensor
  double relative_error = 0.0;  // max_abs_error / max(scale, floor)
};

struct GradientCheckReport {
  std::vector<TensorGradientError> tensors;
  double max_relative_error = 0.0;
  double loss = 0.0;
};

/// Compares graph gradients of the triplet loss with central differences of
/// the eager loss, one parameter entry at a time.
GradientCheckReport gradient_check(const ModelConfig& model, const Parameters& params, const PreparedDocument& doc,
                                   const TripletSelection& sel, double step = 1e-5, double floor = 1e-6);

/// L = 3, d_r = 8, d_h = 8, N = 2.
ModelConfig toy_model_config();

/// A 12-token synthetic document with 6 labelled candidates (2 positive,
/// 4 negative) and the corresponding selection.
struct ToyProblem {
  PreparedDocument doc;
  TripletSelection selection;
};
ToyProblem toy_problem(const ModelConfig& model, std::uint64_t seed);

/// Parameter spread used by the gradient check, large enough that the
/// hyperbolic maps are far from linear.
inline constexpr double kGradientCheckInitStd = 0.1;

/// Runs gradient_check on toy_problem(seed) with toy parameters, as one
/// property with threshold 1e-4.
PropertyResult run_gradient_property(std::uint64_t seed);

}  // namespace hypermatch
