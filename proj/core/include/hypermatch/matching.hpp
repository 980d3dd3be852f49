#pragma once

// Phrase-document relevance, the margin-based triplet loss and inference
// ranking.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypermatch/autodiff.hpp"
#include "hypermatch/candidates.hpp"
#include "hypermatch/hyperbolic.hpp"
#include "hypermatch/tensor.hpp"

namespace hypermatch {

struct RelevanceConfig {
  double lambda = 0.5;
  std::size_t d_h = 768;
  double margin = 1.0;
  double curvature = 1.0;

  /// delta / sqrt(d_h), the hinge offset.
  double scaled_margin() const;
  /// lambda / sqrt(d_h), the weight of the squared distance.
  double distance_weight() const;
  /// Throws InvalidArgument on lambda outside [0, 1], d_h = 0, a
  /// non-positive margin or a negative curvature.
  void validate() const;
};

/// f_c: a hyperbolic linear map to the one-dimensional ball, read back
/// through the logarithmic map at the origin.
struct HyperbolicScorerParameters {
  Tensor weight;  // [d_h, 1]
  Tensor bias;    // [1], tangent vector at the origin; the ball bias is exp_0(bias)
  bool use_bias = true;

  PoincarePoint bias_point(Curvature c) const;
};

/// The real coordinate of log_0(W^T (x)_c phrase (+)_c b).
double f_c_scalar(const PoincarePoint& phrase, const HyperbolicScorerParameters& params);

/// d_c(x, y) for c > 0, and 2|x - y| in the Euclidean limit.
double hyperbolic_distance(const PoincarePoint& x, const PoincarePoint& y);

/// S = (1 - lambda) f - lambda d^2 / sqrt(d_h), from precomputed parts.
double relevance_from_parts(double f, double distance, const RelevanceConfig& cfg);

double relevance(const PoincarePoint& phrase, const PoincarePoint& doc, const HyperbolicScorerParameters& params,
                 const RelevanceConfig& cfg);

/// Mean over all (p+, p-) pairs of max(0, delta/sqrt(d_h) - S+ + S-).
/// Returns nullopt when either side is empty; such documents are skipped.
std::optional<double> triplet_loss(std::span<const double> positives, std::span<const double> negatives,
                                   const RelevanceConfig& cfg);

struct ScoredCandidate {
  std::size_t start = 0;
  std::size_t length = 0;
  TokenSeq surface;
  TokenSeq stemmed;
  double score = 0.0;
};

struct ScoredDocument {
  std::string id;
  std::vector<ScoredCandidate> ranked;
};

/// Descending score; ties go to the earlier start, then the shorter span.
/// Keeps the best-ranked instance of each stemmed form.
ScoredDocument rank_candidates(std::string id, std::vector<ScoredCandidate> scored);

namespace autodiff {

/// f_c for every row of `phrases` [P, d_h], as [P]. Pass an invalid `bias`
/// for the bias-free variant.
Var f_c_rows(Var phrases, Var weight, Var bias, double c);
/// S for every row of `phrases` against the single point `doc` [1, d_h].
Var relevance_rows(Var phrases, Var doc, Var f, const RelevanceConfig& cfg);
/// Mean hinge over all positive/negative pairs, as a one-element tensor.
Var triplet_loss(Var positives, Var negatives, const RelevanceConfig& cfg);

}  // namespace autodiff

}  // namespace hypermatch
