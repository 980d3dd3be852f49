#pragma once

// Timing harness behind `hypermatch bench`: geometry kernel and end-to-end
// scoring measurements, the fixed performance envelopes, and the regression
// gate against a recorded baseline.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace hypermatch::bench {

struct BenchResult {
  std::string op;
  std::size_t dim = 0;
  std::size_t scale = 0;  // points, tokens or documents, depending on op
  double median_ns = 0.0;
  double ops_per_second = 0.0;
  double allocations_per_op = 0.0;
  std::size_t samples = 0;

  /// "op/d<dim>/n<scale>", the key used to match baseline entries.
  std::string key() const;
};

struct BenchOptions {
  std::size_t samples = 30;
  double min_sample_ns = 2e5;  // each sample repeats the op at least this long
  std::size_t warmup = 3;
};

/// Median over options.samples timed samples of `op`, after warm-up.
BenchResult measure(std::string op, std::size_t dim, std::size_t scale, const std::function<void()>& fn,
                    const BenchOptions& options);

inline const std::vector<std::size_t> kGeometryDims = {8, 64, 768};
inline const std::vector<std::size_t> kAverageSizes = {1, 8, 64, 512};

/// mobius_add (buffer-reusing kernel and allocating API), distance, exp/log
/// maps and hyper_average over kAverageSizes points, per dim. Dims must come
/// from {8, 64, 768}.
std::vector<BenchResult> bench_geometry(const std::vector<std::size_t>& dims, double c, const BenchOptions& options);

struct PipelineShape {
  std::size_t tokens = 512;
  std::size_t max_phrase_length = 5;
  std::size_t layers = 12;
  std::size_t hidden = 768;
  std::size_t hyperbolic = 64;
};

/// Scores every candidate of one synthetic document, one document per op.
BenchResult bench_pipeline(const PipelineShape& shape, const BenchOptions& options);

/// Scores `documents` synthetic documents on `threads` workers per op.
BenchResult bench_pipeline_threads(const PipelineShape& shape, std::size_t documents, std::size_t threads,
                                   const BenchOptions& options);

nlohmann::json to_json(const std::vector<BenchResult>& results, const std::string& machine);
std::string format_table(const std::vector<BenchResult>& results);

/// Fixed envelopes: hyper_average median(512)/median(1) <= 600 per dim, zero
/// allocations per steady-state mobius_add kernel call, single-threaded
/// pipeline under one second, and at least 3x throughput from 1 to 4 threads
/// when `hardware_threads` >= 4. Returns one message per violation.
std::vector<std::string> check_envelopes(const std::vector<BenchResult>& results,
                                         std::size_t hardware_threads = std::thread::hardware_concurrency());

/// Entries slower than the baseline median by more than `tolerance`
/// (fractional). Entries missing from either side are ignored.
std::vector<std::string> gate(const std::vector<BenchResult>& results, const nlohmann::json& baseline,
                              double tolerance = 0.25);

}  // namespace hypermatch::bench
