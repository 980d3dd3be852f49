#pragma once

// AdamW training with linear warm-up and decay, negative subsampling,
// gradient clipping, early stopping and resumable checkpoints.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypermatch/checkpoint.hpp"
#include "hypermatch/eval.hpp"
#include "hypermatch/model.hpp"

namespace hypermatch {

struct TrainConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 72;
  double warmup_proportion = 0.10;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // 0 disables clipping
  std::size_t epochs = 10;
  std::uint64_t seed = 13;
  std::size_t max_negatives = 64;
  std::size_t patience = 3;
  std::size_t threads = 1;
  /// Write a checkpoint to `checkpoint_path` every this many epochs (0: only
  /// at the end).
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_path;
  /// Stop (and checkpoint) once this many optimizer steps have run.
  std::optional<std::uint64_t> stop_after_step;

  void validate() const;
  nlohmann::json to_json() const;
  /// Reads the keys it knows and ignores the rest.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  static AdamState zeros(const Parameters& params);
};

/// Learning-rate multiplier for the 1-based step s of `total`: s / W while
/// s < W, then (total - s) / (total - W), where W = warmup * total.
double lr_multiplier(std::uint64_t step, std::uint64_t total, double warmup_proportion);

/// Applies one AdamW update with the given gradients (indexed by slot) and
/// learning rate. Increments adam.step.
void adamw_update(Parameters& params, AdamState& adam, const std::vector<Tensor>& grads, double lr,
                  const TrainConfig& config);

/// Scales `grads` in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

/// Positives and (subsampled) negatives of one document for one step.
struct TripletSelection {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

/// All positives; at most `max_negatives` negatives drawn uniformly without
/// replacement from a generator keyed by (seed, step, document id).
TripletSelection select_triplets(const PreparedDocument& doc, std::uint64_t seed, std::uint64_t step,
                                 std::size_t max_negatives);

struct DocumentGradient {
  double loss = 0.0;
  std::vector<Tensor> grads;  // by slot
};

/// Loss and gradients of one document; nullopt when it has no positive or no
/// negative. A NumericFailure is rethrown naming the document id.
std::optional<DocumentGradient> document_gradient(const Parameters& params, const ModelConfig& model,
                                                  const PreparedDocument& doc, const TripletSelection& sel);

struct StepResult {
  double loss = 0.0;  // mean over used documents
  std::size_t used = 0;
  std::size_t skipped = 0;
  double grad_norm = 0.0;
  double lr = 0.0;
};

/// Forward, backward and one AdamW update over `batch`. `step` is the 1-based
/// step being taken and `total_steps` the schedule length.
StepResult train_step(Parameters& params, AdamState& adam, const ModelConfig& model, const TrainConfig& config,
                      const std::vector<const PreparedDocument*>& batch, std::uint64_t total_steps);

struct EpochRecord {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double mean_loss = 0.0;
  std::size_t documents = 0;
  std::optional<double> validation_f1_at_3;

  nlohmann::json to_json() const;
};

struct TrainResult {
  Parameters params;
  AdamState adam;
  std::uint64_t step = 0;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
  bool interrupted = false;  // stop_after_step reached
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Macro P/R/F1 of the model's ranking against each document's gold.
EvalReport evaluate_model(const Parameters& params, const ModelConfig& model,
                          const std::vector<PreparedDocument>& docs, const std::vector<std::size_t>& ks,
                          std::size_t threads = 1);

/// Fraction of documents (with both labels) whose positives all outscore
/// their negatives.
double pairwise_accuracy(const Parameters& params, const ModelConfig& model,
                         const std::vector<PreparedDocument>& docs, std::size_t threads = 1);

/// Full training loop. With a non-empty `validation` set, F1@3 is measured
/// after each epoch and training stops after `patience` epochs without
/// improvement; the best parameters are restored. With `resume`, training
/// continues from that checkpoint's parameters, optimizer state and step.
TrainResult train(const ModelConfig& model, const TrainConfig& config, const std::vector<PreparedDocument>& train_docs,
                  const std::vector<PreparedDocument>& validation, const Parameters& initial,
                  const CheckpointFile* resume = nullptr, const EpochCallback& on_epoch = {});

/// Parameters, optimizer state and loop state as checkpoint records.
CheckpointFile make_checkpoint(const ModelConfig& model, const Parameters& params, const AdamState& adam);

}  // namespace hypermatch
