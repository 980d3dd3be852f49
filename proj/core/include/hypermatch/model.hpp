#pragma once

// The full scoring model: configuration, trainable parameters, and the two
// evaluation paths (eager for inference, graph for training).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypermatch/autodiff.hpp"
#include "hypermatch/candidates.hpp"
#include "hypermatch/encoders.hpp"
#include "hypermatch/matching.hpp"

namespace hypermatch {

struct ModelConfig {
  std::size_t layers = 12;      // L
  std::size_t hidden = 768;     // d_r
  std::size_t hyperbolic = 768; // d_h
  std::size_t max_phrase_length = 5;
  double curvature = 1.0;
  double lambda = 0.5;
  double margin = 1.0;
  bool cnn_bias = false;
  bool scorer_bias = true;
  bool use_mixing = true;
  bool euclidean = false;  // forces c = 0

  double effective_curvature() const { return euclidean ? 0.0 : curvature; }
  RelevanceConfig relevance() const;
  void validate() const;

  /// Canonical form: fixed key set, sorted keys. The checkpoint hash is taken
  /// over its compact dump.
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j);
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct ConstNamedTensor {
  std::string name;
  const Tensor* tensor;
};

class Parameters {
 public:
  Parameters() = default;
  /// Zero-filled tensors shaped for `config`.
  explicit Parameters(const ModelConfig& config);

  MixingParameters mixing;
  PhraseBankParameters bank;
  DocumentEncoderParameters document;
  HyperbolicScorerParameters scorer;

  /// Every trainable tensor in a fixed order; the index is the gradient slot.
  /// Tensors disabled by the configuration are not listed.
  std::vector<NamedTensor> tensors();
  std::vector<ConstNamedTensor> tensors() const;

  std::size_t count() const;
  bool all_finite() const;

 private:
  bool use_mixing_ = true;
};

/// Gaussian entries, mean 0, standard deviation 0.02, deterministic in seed.
Parameters init_parameters(const ModelConfig& config, std::uint64_t seed, double stddev = 0.02);

/// Embeddings and labelled candidates for one document.
struct PreparedDocument {
  std::string id;
  LayeredTokenEmbeddings embeddings;
  std::vector<Candidate> candidates;
  std::vector<TokenSeq> gold;
};

/// Extracts and labels candidates over the tokens covered by `embeddings`
/// (fewer than doc.tokens when the embeddings were truncated).
PreparedDocument prepare_document(const Document& doc, LayeredTokenEmbeddings embeddings,
                                  std::size_t max_phrase_length);

/// Mixed token vectors according to the configuration.
MixedTokenEmbeddings mix_tokens(const LayeredTokenEmbeddings& layers, const Parameters& params,
                                const ModelConfig& config);

/// Eager relevance of each candidate, in candidate order.
std::vector<double> score_candidates(const Parameters& params, const ModelConfig& config,
                                     const LayeredTokenEmbeddings& layers, const std::vector<Candidate>& candidates);

/// Scores and ranks every candidate of a document.
ScoredDocument rank_document(const Parameters& params, const ModelConfig& config, const PreparedDocument& doc);

/// Eager triplet loss over the candidates at `positives` and `negatives`.
std::optional<double> document_loss(const Parameters& params, const ModelConfig& config,
                                    const LayeredTokenEmbeddings& layers, const std::vector<Candidate>& candidates,
                                    const std::vector<std::size_t>& positives,
                                    const std::vector<std::size_t>& negatives);

/// True when every positive outscores every negative.
bool pairwise_ranking_correct(const std::vector<double>& scores, const std::vector<Candidate>& candidates);

namespace autodiff {

/// Parameter leaves of one graph.
struct BoundParameters {
  Var v_a, w_a;
  std::vector<Var> filters, biases;
  Var w_h;
  Var scorer_weight, scorer_bias;
};

/// Registers every tensor of `params` as a leaf whose slot is its index in
/// Parameters::tensors().
BoundParameters bind(Graph& g, const Parameters& params, const ModelConfig& config);

/// Relevance scores for `candidates` as a [P] Var, in the given order.
Var score_candidates(Graph& g, const BoundParameters& bound, const ModelConfig& config,
                     const LayeredTokenEmbeddings& layers, const std::vector<Candidate>& candidates);

/// Triplet loss graph; invalid Var when either index list is empty.
Var document_loss(Graph& g, const BoundParameters& bound, const ModelConfig& config,
                  const LayeredTokenEmbeddings& layers, const std::vector<Candidate>& candidates,
                  const std::vector<std::size_t>& positives, const std::vector<std::size_t>& negatives);

}  // namespace autodiff

}  // namespace hypermatch
