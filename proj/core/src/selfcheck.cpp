#include "hypermatch/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hypermatch/error.hpp"
#include "hypermatch/kernels.hpp"
#include "hypermatch/rng.hpp"
#include "hypermatch/synth.hpp"

namespace hypermatch {

namespace {

// ---- reference formulas used to build faulty operation tables --------------

using Vec = std::vector<double>;

Vec mobius_ref(std::span<const double> x, std::span<const double> y, double c, double x2_sign) {
  const double xy = kernels::dot(x, y), x2 = kernels::dot(x, x), y2 = kernels::dot(y, y);
  const double a = 1.0 + 2.0 * c * xy + c * y2;
  const double b = 1.0 + x2_sign * c * x2;
  const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (a * x[i] + b * y[i]) / den;
  kernels::project_to_ball(out, c, out);
  return out;
}

Vec negated(std::span<const double> x) {
  Vec out(x.begin(), x.end());
  for (double& v : out) v = -v;
  return out;
}

GeometryOps ops_from_mobius(double x2_sign) {
  GeometryOps ops = library_ops();
  ops.mobius_add = [x2_sign](const PoincarePoint& x, const PoincarePoint& y) {
    return PoincarePoint(mobius_ref(x.coords(), y.coords(), x.curvature().value(), x2_sign), x.curvature());
  };
  ops.distance = [x2_sign](const PoincarePoint& x, const PoincarePoint& y) {
    const double c = x.curvature().value();
    const Vec w = mobius_ref(negated(x.coords()), y.coords(), c, x2_sign);
    return 2.0 / std::sqrt(c) * kernels::atanh_clamped(std::sqrt(c) * kernels::norm(w));
  };
  ops.exp_map = [x2_sign](const PoincarePoint& base, const TangentVector& v) {
    const double c = base.curvature().value();
    const double n = kernels::norm(v.coords);
    if (n == 0.0) return base;
    const double sc = std::sqrt(c);
    Vec step(v.coords.size());
    kernels::scale(v.coords, std::tanh(sc * base.conformal_factor() * n / 2.0) / (sc * n), step);
    kernels::project_to_ball(step, c, step);
    return PoincarePoint(mobius_ref(base.coords(), step, c, x2_sign), base.curvature());
  };
  ops.log_map = [x2_sign](const PoincarePoint& base, const PoincarePoint& y) {
    const double c = base.curvature().value();
    Vec w = mobius_ref(negated(base.coords()), y.coords(), c, x2_sign);
    const double n = kernels::norm(w);
    if (n == 0.0) return TangentVector(Vec(w.size(), 0.0), base);
    const double sc = std::sqrt(c);
    kernels::scale(w, 2.0 / (sc * base.conformal_factor()) * kernels::atanh_clamped(sc * n) / n, w);
    return TangentVector(std::move(w), base);
  };
  return ops;
}

// ---- sampling ---------------------------------------------------------------

Vec random_vector(Rng& rng, std::size_t dim, double max_norm) {
  Vec v(dim);
  for (double& x : v) x = rng.gaussian(0.0, 1.0);
  const double n = kernels::norm(v);
  const double target = max_norm * rng.uniform();
  for (double& x : v) x = x / n * target;
  return v;
}

PoincarePoint random_point(Rng& rng, std::size_t dim, double max_norm, Curvature c) {
  return PoincarePoint(random_vector(rng, dim, max_norm), c);
}

double distance_between(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::string fmt_err(const char* what, double err, double tol) {
  std::ostringstream s;
  s.precision(3);
  s << what << " " << std::scientific << err << " (tolerance " << tol << ")";
  return s.str();
}

using Check = std::function<std::string(Rng&)>;  // empty string: pass

PropertyResult run_property(const std::string& name, std::uint64_t seed, const Check& check) {
  Rng rng(hash_combine(seed, fnv1a64(name)));
  PropertyResult r{name, false, {}};
  try {
    r.detail = check(rng);
    r.passed = r.detail.empty();
    if (r.passed) r.detail = "ok";
  } catch (const std::exception& e) {
    r.detail = std::string("threw: ") + e.what();
  }
  return r;
}

}  // namespace

GeometryOps library_ops() {
  GeometryOps ops;
  ops.mobius_add = [](const PoincarePoint& x, const PoincarePoint& y) { return mobius_add(x, y); };
  ops.mobius_matvec = [](const Tensor& m, const PoincarePoint& x) { return mobius_matvec(m, x); };
  ops.distance = [](const PoincarePoint& x, const PoincarePoint& y) { return poincare_distance(x, y); };
  ops.exp_map = [](const PoincarePoint& b, const TangentVector& v) { return exp_map(b, v); };
  ops.log_map = [](const PoincarePoint& b, const PoincarePoint& y) { return log_map(b, y); };
  ops.to_klein = [](const PoincarePoint& x) { return poincare_to_klein(x); };
  ops.from_klein = [](const KleinPoint& k) { return klein_to_poincare(k); };
  ops.hyper_average = [](std::span<const PoincarePoint> pts) { return hyper_average(pts); };
  return ops;
}

std::vector<std::string> fault_names() { return {"mobius-sign", "klein-denominator", "distance-scale"}; }

GeometryOps faulty_ops(std::string_view fault) {
  if (fault == "mobius-sign") return ops_from_mobius(+1.0);
  if (fault == "klein-denominator") {
    GeometryOps ops = library_ops();
    ops.to_klein = [](const PoincarePoint& x) {
      const double c = x.curvature().value();
      const double den = 1.0 - c * kernels::dot(x.coords(), x.coords());
      Vec k(x.coords().begin(), x.coords().end());
      for (double& v : k) v = 2.0 * v / den;
      return KleinPoint(std::move(k), x.curvature());
    };
    return ops;
  }
  if (fault == "distance-scale") {
    GeometryOps ops = library_ops();
    ops.distance = [](const PoincarePoint& x, const PoincarePoint& y) { return poincare_distance(x, y) / 2.0; };
    return ops;
  }
  throw InvalidArgument("unknown fault '" + std::string(fault) + "'");
}

std::vector<PropertyResult> run_geometry_suite(const GeometryOps& ops, std::uint64_t seed) {
  std::vector<PropertyResult> out;
  const Curvature one(1.0);

  out.push_back(run_property("mobius_identity", seed, [&](Rng& rng) -> std::string {
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      const std::size_t dim = 1 + rng.below(8);
      const auto x = random_point(rng, dim, 0.9, one);
      const auto o = PoincarePoint::origin(dim, one);
      worst = std::max(worst, distance_between(ops.mobius_add(o, x).coords(), x.coords()));
      worst = std::max(worst, distance_between(ops.mobius_add(x, o).coords(), x.coords()));
    }
    return worst <= 1e-12 ? "" : fmt_err("max deviation", worst, 1e-12);
  }));

  out.push_back(run_property("mobius_inverse", seed, [&](Rng& rng) -> std::string {
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      const std::size_t dim = 1 + rng.below(8);
      const auto x = random_point(rng, dim, 0.9, one);
      const PoincarePoint neg(negated(x.coords()), one);
      worst = std::max(worst, kernels::norm(ops.mobius_add(x, neg).coords()));
    }
    return worst <= 1e-12 ? "" : fmt_err("max |x (+) -x|", worst, 1e-12);
  }));

  out.push_back(run_property("mobius_collinear", seed, [&](Rng&) -> std::string {
    const auto r = ops.mobius_add(PoincarePoint({0.3, 0.0}, one), PoincarePoint({0.4, 0.0}, one));
    const double err = std::max(std::abs(r[0] - 0.625), std::abs(r[1]));
    return err <= 1e-12 ? "" : fmt_err("deviation from (0.625, 0)", err, 1e-12);
  }));

  out.push_back(run_property("mobius_matvec_scalar", seed, [&](Rng&) -> std::string {
    const Tensor m = Tensor::matrix(2, 2, {2.0, 0.0, 0.0, 2.0});
    const auto r = ops.mobius_matvec(m, PoincarePoint({0.3, 0.0}, one));
    const double expect = std::tanh(2.0 * std::atanh(0.3));
    const double err = std::max(std::abs(r[0] - expect), std::abs(r[1]));
    return err <= 1e-12 ? "" : fmt_err("deviation", err, 1e-12);
  }));

  out.push_back(run_property("euclidean_limit_addition", seed, [&](Rng& rng) -> std::string {
    const Curvature tiny(1e-10);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const std::size_t dim = 1 + rng.below(8);
      const auto x = random_point(rng, dim, 0.5, tiny);
      const auto y = random_point(rng, dim, 0.5, tiny);
      Vec sum(dim);
      for (std::size_t i = 0; i < dim; ++i) sum[i] = x[i] + y[i];
      worst = std::max(worst, distance_between(ops.mobius_add(x, y).coords(), sum));
    }
    return worst <= 1e-4 ? "" : fmt_err("max |x (+) y - (x + y)|", worst, 1e-4);
  }));

  out.push_back(run_property("euclidean_limit_distance", seed, [&](Rng& rng) -> std::string {
    const Curvature tiny(1e-10);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const std::size_t dim = 1 + rng.below(8);
      const auto x = random_point(rng, dim, 0.5, tiny);
      const auto y = random_point(rng, dim, 0.5, tiny);
      worst = std::max(worst, std::abs(ops.distance(x, y) - 2.0 * distance_between(x.coords(), y.coords())));
    }
    return worst <= 1e-4 ? "" : fmt_err("max |d - 2|x - y||", worst, 1e-4);
  }));

  out.push_back(run_property("distance_symmetry", seed, [&](Rng& rng) -> std::string {
    for (int t = 0; t < 200; ++t) {
      const std::size_t dim = 1 + rng.below(8);
      const auto x = random_point(rng, dim, 0.9, one);
      const auto y = random_point(rng, dim, 0.9, one);
      const double a = ops.distance(x, y), b = ops.distance(y, x);
      if (!(a >= 0.0) || std::abs(a - b) > 1e-12) return fmt_err("asymmetry", std::abs(a - b), 1e-12);
    }
    return "";
  }));

  out.push_back(run_property("distance_from_origin", seed, [&](Rng&) -> std::string {
    const double d = ops.distance(PoincarePoint::origin(2, one), PoincarePoint({0.5, 0.0}, one));
    const double err = std::abs(d - 2.0 * std::atanh(0.5));
    return err <= 1e-12 ? "" : fmt_err("deviation from 2 atanh(0.5)", err, 1e-12);
  }));

  out.push_back(run_property("triangle_inequality", seed, [&](Rng& rng) -> std::string {
    for (int t = 0; t < 500; ++t) {
      const std::size_t dim = 1 + rng.below(8);
      const auto x = random_point(rng, dim, 0.9, one);
      const auto y = random_point(rng, dim, 0.9, one);
      const auto z = random_point(rng, dim, 0.9, one);
      const double slack = ops.distance(x, y) + ops.distance(y, z) + 1e-9 - ops.distance(x, z);
      if (slack < 0.0) return fmt_err("violation", -slack, 0.0);
    }
    return "";
  }));

  out.push_back(run_property("exp_log_inversion", seed, [&](Rng& rng) -> std::string {
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
      const std::size_t dim = 1 + rng.below(8);
      const auto base = random_point(rng, dim, 0.9, one);
      const TangentVector v(random_vector(rng, dim, 1.0), base);
      const auto back = ops.log_map(base, ops.exp_map(base, v));
      worst = std::max(worst, distance_between(back.coords, v.coords));
    }
    return worst <= 1e-6 ? "" : fmt_err("max |log(exp(v)) - v|", worst, 1e-6);
  }));

  out.push_back(run_property("exp_origin_closed_form", seed, [&](Rng&) -> std::string {
    const auto o = PoincarePoint::origin(2, one);
    const auto p = ops.exp_map(o, TangentVector({0.6, 0.8}, o));
    const double err = std::abs(kernels::norm(p.coords()) - std::tanh(1.0));
    return err <= 1e-12 ? "" : fmt_err("deviation from tanh(1)", err, 1e-12);
  }));

  out.push_back(run_property("klein_roundtrip", seed, [&](Rng& rng) -> std::string {
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
      const std::size_t dim = 1 + rng.below(8);
      const auto x = random_point(rng, dim, 0.99, one);
      worst = std::max(worst, distance_between(ops.from_klein(ops.to_klein(x)).coords(), x.coords()));
    }
    return worst <= 1e-9 ? "" : fmt_err("max roundtrip error", worst, 1e-9);
  }));

  out.push_back(run_property("midpoint_symmetric_pair", seed, [&](Rng& rng) -> std::string {
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      const std::size_t dim = 1 + rng.below(8);
      const auto x = random_point(rng, dim, 0.99, one);
      const std::vector<PoincarePoint> pair{x, PoincarePoint(negated(x.coords()), one)};
      worst = std::max(worst, kernels::norm(ops.hyper_average(pair).coords()));
    }
    return worst <= 1e-9 ? "" : fmt_err("max |midpoint|", worst, 1e-9);
  }));

  out.push_back(run_property("midpoint_permutation", seed, [&](Rng& rng) -> std::string {
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      const std::size_t dim = 1 + rng.below(8);
      std::vector<PoincarePoint> pts;
      const std::size_t n = 1 + rng.below(16);
      for (std::size_t i = 0; i < n; ++i) pts.push_back(random_point(rng, dim, 0.95, one));
      const auto a = ops.hyper_average(pts);
      if (a.curvature().value() * kernels::dot(a.coords(), a.coords()) >= 1.0) return "midpoint left the ball";
      rng.shuffle(pts);
      worst = std::max(worst, distance_between(ops.hyper_average(pts).coords(), a.coords()));
    }
    return worst <= 1e-12 ? "" : fmt_err("max permutation change", worst, 1e-12);
  }));

  return out;
}

GradientCheckReport gradient_check(const ModelConfig& model, const Parameters& params, const PreparedDocument& doc,
                                   const TripletSelection& sel, double step, double floor) {
  const auto analytic = document_gradient(params, model, doc, sel);
  if (!analytic) throw InvalidArgument("gradient_check: selection needs a positive and a negative");
  GradientCheckReport report;
  report.loss = analytic->loss;
  Parameters probe = params;
  auto tensors = probe.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    TensorGradientError e;
    e.name = tensors[k].name;
    std::span<double> values = tensors[k].tensor->values();
    const Tensor& g = analytic->grads[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = *document_loss(probe, model, doc.embeddings, doc.candidates, sel.positives, sel.negatives);
      values[i] = saved - step;
      const double down = *document_loss(probe, model, doc.embeddings, doc.candidates, sel.positives, sel.negatives);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      e.max_abs_error = std::max(e.max_abs_error, std::abs(numeric - g[i]));
      e.scale = std::max({e.scale, std::abs(numeric), std::abs(g[i])});
    }
    e.relative_error = e.max_abs_error / std::max(e.scale, floor);
    report.max_relative_error = std::max(report.max_relative_error, e.relative_error);
    report.tensors.push_back(std::move(e));
  }
  return report;
}

ModelConfig toy_model_config() {
  ModelConfig c;
  c.layers = 3;
  c.hidden = 8;
  c.hyperbolic = 8;
  c.max_phrase_length = 2;
  return c;
}

ToyProblem toy_problem(const ModelConfig& model, std::uint64_t seed) {
  Rng rng(seed);
  const auto words = pseudo_words(12, hash_combine(seed, 3));
  Document doc;
  doc.id = "toy-" + std::to_string(seed);
  doc.tokens = words;
  doc.gold = {{words[2]}, {words[6], words[7]}};
  const auto all = label_candidates(extract_candidates(doc, model.max_phrase_length), doc.gold);
  std::vector<Candidate> pos, neg;
  for (const auto& c : all) (c.label == Label::positive ? pos : neg).push_back(c);
  rng.shuffle(neg);
  neg.resize(std::min<std::size_t>(4, neg.size()));
  ToyProblem p;
  p.doc.id = doc.id;
  p.doc.gold = doc.gold;
  p.doc.embeddings = synth_embeddings(doc, model.layers, model.hidden, seed);
  for (auto& c : pos) {
    p.selection.positives.push_back(p.doc.candidates.size());
    p.doc.candidates.push_back(std::move(c));
  }
  for (auto& c : neg) {
    p.selection.negatives.push_back(p.doc.candidates.size());
    p.doc.candidates.push_back(std::move(c));
  }
  return p;
}

PropertyResult run_gradient_property(std::uint64_t seed) {
  PropertyResult r{"gradient_finite_difference", false, {}};
  try {
    const ModelConfig model = toy_model_config();
    const Parameters params = init_parameters(model, seed, kGradientCheckInitStd);
    const ToyProblem toy = toy_problem(model, seed);
    const auto report = gradient_check(model, params, toy.doc, toy.selection);
    r.passed = report.max_relative_error <= 1e-4;
    r.detail = fmt_err("max relative error", report.max_relative_error, 1e-4);
  } catch (const std::exception& e) {
    r.detail = std::string("threw: ") + e.what();
  }
  return r;
}

}  // namespace hypermatch
