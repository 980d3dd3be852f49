#include "hypermatch/matching.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "hypermatch/error.hpp"
#include "hypermatch/hyperbolic_graph.hpp"
#include "hypermatch/kernels.hpp"

namespace hypermatch {

double RelevanceConfig::scaled_margin() const { return margin / std::sqrt(static_cast<double>(d_h)); }

double RelevanceConfig::distance_weight() const { return lambda / std::sqrt(static_cast<double>(d_h)); }

void RelevanceConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must lie in [0, 1]");
  if (d_h == 0) throw InvalidArgument("d_h must be positive");
  if (!(margin > 0.0) || !std::isfinite(margin)) throw InvalidArgument("margin must be positive");
  Curvature check(curvature);
  (void)check;
}

PoincarePoint HyperbolicScorerParameters::bias_point(Curvature c) const {
  if (!use_bias) return PoincarePoint::origin(1, c);
  if (bias.size() != 1) throw InvalidArgument("scorer bias must hold one value");
  return exp_map0(bias.values(), c);
}

double f_c_scalar(const PoincarePoint& phrase, const HyperbolicScorerParameters& params) {
  const std::size_t d = phrase.dim();
  if (params.weight.rank() != 2 || params.weight.shape()[0] != d || params.weight.shape()[1] != 1) {
    throw InvalidArgument("f_c_scalar: weight " + shape_string(params.weight.shape()) + " does not fit dimension " +
                          std::to_string(d));
  }
  const double c = phrase.curvature().value();
  double mx = 0.0;
  kernels::matmul(phrase.coords(), params.weight.values(), 1, d, 1, {&mx, 1});
  kernels::mobius_matvec_from_image(phrase.coords(), {&mx, 1}, c, {&mx, 1});
  double y = mx;
  if (params.use_bias) {
    const PoincarePoint b = params.bias_point(phrase.curvature());
    kernels::mobius_add({&mx, 1}, b.coords(), c, {&y, 1});
  }
  double out = 0.0;
  kernels::log0({&y, 1}, c, {&out, 1});
  return out;
}

double hyperbolic_distance(const PoincarePoint& x, const PoincarePoint& y) {
  if (x.curvature().is_euclidean()) {
    if (y.curvature() != x.curvature()) throw InvalidArgument("hyperbolic_distance: curvature mismatch");
    return euclidean_distance_limit(x.coords(), y.coords());
  }
  return poincare_distance(x, y);
}

double relevance_from_parts(double f, double distance, const RelevanceConfig& cfg) {
  return (1.0 - cfg.lambda) * f - cfg.distance_weight() * (distance * distance);
}

double relevance(const PoincarePoint& phrase, const PoincarePoint& doc, const HyperbolicScorerParameters& params,
                 const RelevanceConfig& cfg) {
  return relevance_from_parts(f_c_scalar(phrase, params), hyperbolic_distance(phrase, doc), cfg);
}

std::optional<double> triplet_loss(std::span<const double> positives, std::span<const double> negatives,
                                   const RelevanceConfig& cfg) {
  if (positives.empty() || negatives.empty()) return std::nullopt;
  const double m = cfg.scaled_margin();
  double acc = 0.0;
  for (double sp : positives) {
    for (double sn : negatives) acc += std::max((sn - sp) + m, 0.0);
  }
  return acc / static_cast<double>(positives.size() * negatives.size());
}

ScoredDocument rank_candidates(std::string id, std::vector<ScoredCandidate> scored) {
  std::stable_sort(scored.begin(), scored.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.length < b.length;
  });
  ScoredDocument out{std::move(id), {}};
  std::unordered_set<std::string> seen;
  for (auto& c : scored) {
    if (!std::isfinite(c.score)) throw NumericFailure("rank_candidates: non-finite score in document " + out.id);
    if (seen.insert(stem_key(c.stemmed)).second) out.ranked.push_back(std::move(c));
  }
  return out;
}

namespace autodiff {

Var f_c_rows(Var phrases, Var weight, Var bias, double c) {
  Var y = mobius_matvec_rows(phrases, weight, c);
  if (bias.valid()) {
    const Var b = exp0_rows(reshape(bias, {1, 1}), c);
    y = mobius_add_rows(y, repeat_rows(b, phrases.rows()), c);
  }
  return reshape(log0_rows(y, c), {phrases.rows()});
}

Var relevance_rows(Var phrases, Var doc, Var f, const RelevanceConfig& cfg) {
  const Var d = distance_rows(phrases, repeat_rows(doc, phrases.rows()), cfg.curvature);
  return sub(scale(f, 1.0 - cfg.lambda), scale(mul(d, d), cfg.distance_weight()));
}

Var triplet_loss(Var positives, Var negatives, const RelevanceConfig& cfg) {
  return mean(relu(add_scalar(outer_sub(positives, negatives), cfg.scaled_margin())));
}

}  // namespace autodiff

}  // namespace hypermatch
