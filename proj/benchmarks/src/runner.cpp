#include "hypermatch_bench/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>

#include <fmt/format.h>

#include "hypermatch/error.hpp"
#include "hypermatch/hyperbolic.hpp"
#include "hypermatch/kernels.hpp"
#include "hypermatch/model.hpp"
#include "hypermatch/parallel.hpp"
#include "hypermatch/rng.hpp"
#include "hypermatch/synth.hpp"
#include "hypermatch_bench/alloc_counter.hpp"

namespace hypermatch::bench {

namespace {

using Clock = std::chrono::steady_clock;

// Keeps the optimizer from discarding benchmarked results.
template <class T>
void keep(const T& value) {
  asm volatile("" : : "g"(&value) : "memory");
}

std::vector<double> random_vector(Rng& rng, std::size_t dim, double max_norm) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.gaussian(0.0, 1.0);
  const double n = kernels::norm(v);
  const double target = max_norm * (0.1 + 0.9 * rng.uniform());
  for (double& x : v) x = x / n * target;
  return v;
}

PreparedDocument synthetic_document(const PipelineShape& shape, std::size_t index) {
  CorpusRecord r;
  r.id = "bench-" + std::to_string(index);
  const auto words = pseudo_words(shape.tokens, hash_combine(17, index));
  r.tokens = words;
  r.gold = {{words[0]}};
  return prepare_document(r, synth_embeddings(r, shape.layers, shape.hidden, 3), shape.max_phrase_length);
}

ModelConfig pipeline_model(const PipelineShape& shape) {
  ModelConfig m;
  m.layers = shape.layers;
  m.hidden = shape.hidden;
  m.hyperbolic = shape.hyperbolic;
  m.max_phrase_length = shape.max_phrase_length;
  return m;
}

}  // namespace

std::string BenchResult::key() const { return fmt::format("{}/d{}/n{}", op, dim, scale); }

BenchResult measure(std::string op, std::size_t dim, std::size_t scale, const std::function<void()>& fn,
                    const BenchOptions& options) {
  if (options.samples == 0) throw InvalidArgument("measure: samples must be >= 1");
  for (std::size_t i = 0; i < options.warmup; ++i) fn();
  // Calibrate the repetition count so one sample lasts at least min_sample_ns.
  std::size_t reps = 1;
  for (;;) {
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < reps; ++i) fn();
    const double ns = std::chrono::duration<double, std::nano>(Clock::now() - t0).count();
    if (ns >= options.min_sample_ns || reps >= (std::size_t{1} << 24)) break;
    reps *= 2;
  }
  std::vector<double> per_op(options.samples);
  const std::uint64_t allocs_before = allocation_count();
  for (auto& sample : per_op) {
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < reps; ++i) fn();
    sample = std::chrono::duration<double, std::nano>(Clock::now() - t0).count() / static_cast<double>(reps);
  }
  const std::uint64_t allocs = allocation_count() - allocs_before;
  std::sort(per_op.begin(), per_op.end());
  const std::size_t n = per_op.size();
  const double median = n % 2 == 1 ? per_op[n / 2] : 0.5 * (per_op[n / 2 - 1] + per_op[n / 2]);
  BenchResult r;
  r.op = std::move(op);
  r.dim = dim;
  r.scale = scale;
  r.median_ns = median;
  r.ops_per_second = median > 0.0 ? 1e9 / median : 0.0;
  r.allocations_per_op = static_cast<double>(allocs) / static_cast<double>(reps * n);
  r.samples = n;
  return r;
}

std::vector<BenchResult> bench_geometry(const std::vector<std::size_t>& dims, double c, const BenchOptions& options) {
  std::vector<BenchResult> out;
  const Curvature curv(c);
  for (std::size_t dim : dims) {
    if (std::find(kGeometryDims.begin(), kGeometryDims.end(), dim) == kGeometryDims.end()) {
      throw InvalidArgument("bench_geometry: dim " + std::to_string(dim) + " not in {8, 64, 768}");
    }
    Rng rng(hash_combine(41, dim));
    const double radius = 0.9 / std::sqrt(c);
    const auto xv = random_vector(rng, dim, radius), yv = random_vector(rng, dim, radius);
    const PoincarePoint x(xv, curv), y(yv, curv);
    const TangentVector v(random_vector(rng, dim, 1.0), x);
    std::vector<double> buffer(dim);

    out.push_back(measure("mobius_add_kernel", dim, 1, [&] {
      kernels::mobius_add(xv, yv, c, buffer);
      keep(buffer[0]);
    }, options));
    out.push_back(measure("mobius_add", dim, 1, [&] { keep(mobius_add(x, y)); }, options));
    out.push_back(measure("poincare_distance", dim, 1, [&] { keep(poincare_distance(x, y)); }, options));
    out.push_back(measure("exp_map", dim, 1, [&] { keep(exp_map(x, v)); }, options));
    const PoincarePoint target = exp_map(x, v);
    out.push_back(measure("log_map", dim, 1, [&] { keep(log_map(x, target)); }, options));
    for (std::size_t n : kAverageSizes) {
      std::vector<PoincarePoint> pts;
      pts.reserve(n);
      for (std::size_t i = 0; i < n; ++i) pts.emplace_back(random_vector(rng, dim, radius), curv);
      out.push_back(measure("hyper_average", dim, n, [&] { keep(hyper_average(pts)); }, options));
    }
  }
  return out;
}

BenchResult bench_pipeline(const PipelineShape& shape, const BenchOptions& options) {
  const ModelConfig model = pipeline_model(shape);
  const Parameters params = init_parameters(model, 1);
  const PreparedDocument doc = synthetic_document(shape, 0);
  return measure("pipeline", shape.hyperbolic, shape.tokens, [&] { keep(rank_document(params, model, doc)); },
                 options);
}

BenchResult bench_pipeline_threads(const PipelineShape& shape, std::size_t documents, std::size_t threads,
                                   const BenchOptions& options) {
  const ModelConfig model = pipeline_model(shape);
  const Parameters params = init_parameters(model, 1);
  std::vector<PreparedDocument> docs;
  for (std::size_t i = 0; i < documents; ++i) docs.push_back(synthetic_document(shape, i));
  std::vector<ScoredDocument> ranked(documents);
  auto r = measure(fmt::format("pipeline_threads{}", threads), shape.hyperbolic, documents, [&] {
    parallel_for(documents, threads, [&](std::size_t i) { ranked[i] = rank_document(params, model, docs[i]); });
  }, options);
  return r;
}

nlohmann::json to_json(const std::vector<BenchResult>& results, const std::string& machine) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& r : results) {
    entries.push_back({{"op", r.op},
                       {"dim", r.dim},
                       {"scale", r.scale},
                       {"median_ns", r.median_ns},
                       {"ops_per_second", r.ops_per_second},
                       {"allocations_per_op", r.allocations_per_op},
                       {"samples", r.samples}});
  }
  return {{"machine", machine}, {"results", entries}};
}

std::string format_table(const std::vector<BenchResult>& results) {
  std::string out = fmt::format("{:<20} {:>5} {:>6} {:>14} {:>14} {:>10}\n", "op", "dim", "n", "median ns",
                                "ops/s", "allocs/op");
  for (const auto& r : results) {
    out += fmt::format("{:<20} {:>5} {:>6} {:>14.1f} {:>14.1f} {:>10.2f}\n", r.op, r.dim, r.scale, r.median_ns,
                       r.ops_per_second, r.allocations_per_op);
  }
  return out;
}

std::vector<std::string> check_envelopes(const std::vector<BenchResult>& results, std::size_t hardware_threads) {
  std::vector<std::string> violations;
  std::map<std::size_t, double> avg1, avg512;
  double threads1 = 0.0, threads4 = 0.0;
  for (const auto& r : results) {
    if (r.op == "pipeline_threads1") threads1 = r.median_ns;
    if (r.op == "pipeline_threads4") threads4 = r.median_ns;
    if (r.op == "hyper_average" && r.scale == 1) avg1[r.dim] = r.median_ns;
    if (r.op == "hyper_average" && r.scale == 512) avg512[r.dim] = r.median_ns;
    if (r.op == "mobius_add_kernel" && r.allocations_per_op != 0.0) {
      violations.push_back(fmt::format("{}: {} allocations per op, expected 0", r.key(), r.allocations_per_op));
    }
    if (r.op == "pipeline" && r.median_ns >= 1e9) {
      violations.push_back(fmt::format("{}: median {:.3f} s, expected under 1 s", r.key(), r.median_ns / 1e9));
    }
  }
  for (const auto& [dim, one] : avg1) {
    const auto it = avg512.find(dim);
    if (it == avg512.end() || one <= 0.0) continue;
    const double ratio = it->second / one;
    if (ratio > 600.0) {
      violations.push_back(fmt::format("hyper_average/d{}: median(512)/median(1) = {:.1f}, expected <= 600", dim, ratio));
    }
  }
  // Four workers cannot beat one on fewer than four hardware threads.
  if (hardware_threads >= 4 && threads1 > 0.0 && threads4 > 0.0 && threads1 / threads4 < 3.0) {
    violations.push_back(fmt::format("pipeline_threads: 1-to-4 thread speedup {:.2f}x, expected >= 3x", threads1 / threads4));
  }
  return violations;
}

std::vector<std::string> gate(const std::vector<BenchResult>& results, const nlohmann::json& baseline,
                              double tolerance) {
  std::map<std::string, double> reference;
  for (const auto& e : baseline.at("results")) {
    BenchResult b;
    b.op = e.at("op").get<std::string>();
    b.dim = e.at("dim").get<std::size_t>();
    b.scale = e.at("scale").get<std::size_t>();
    reference[b.key()] = e.at("median_ns").get<double>();
  }
  std::vector<std::string> violations;
  for (const auto& r : results) {
    const auto it = reference.find(r.key());
    if (it == reference.end()) continue;
    const double limit = it->second * (1.0 + tolerance);
    if (r.median_ns > limit) {
      violations.push_back(fmt::format("{}: median {:.1f} ns exceeds baseline {:.1f} ns by more than {:.0f}%", r.key(),
                                       r.median_ns, it->second, tolerance * 100.0));
    }
  }
  return violations;
}

}  // namespace hypermatch::bench
