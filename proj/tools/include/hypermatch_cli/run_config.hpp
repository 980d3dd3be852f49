#pragma once

// The merged view of model, training and path settings used by every
// subcommand. A config file holds flat JSON keys; command-line flags are
// applied on top.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypermatch/model.hpp"
#include "hypermatch/synth.hpp"
#include "hypermatch/training.hpp"

namespace hypermatch::cli {

/// Bad flags, unknown config keys or missing required paths (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthCorpusConfig synth;
  std::filesystem::path corpus;
  std::filesystem::path validation;
  std::filesystem::path embeddings;
  std::filesystem::path checkpoint;
  std::filesystem::path out;
  std::filesystem::path predictions;
  bool synthetic = false;
  std::uint64_t embedding_seed = 7;
  std::vector<std::size_t> ks = {1, 3, 5, 10};
  std::size_t threads = 0;  // 0: available parallelism

  /// Applies flat keys from a JSON object. Model keys (layers, hidden,
  /// hyperbolic, ...), training keys (learning_rate, epochs, ...), synthetic
  /// corpus keys (documents, min_gold, ...) and the path and mode keys are
  /// accepted; anything else is a UsageError.
  void apply_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);

  /// Effective settings as flat JSON (paths included).
  nlohmann::json to_json() const;
};

/// Every flat key apply_json() accepts, sorted.
std::vector<std::string> known_keys();

}  // namespace hypermatch::cli
