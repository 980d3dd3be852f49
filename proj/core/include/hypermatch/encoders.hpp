#pragma once

// Word mixing, hyperbolic phrase encoding and hyperbolic document encoding.
//
// Every operation exists twice: an eager version over concrete tensors (used
// at inference) and a graph version over autodiff::Var (used in training).
// Both evaluate identically.

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "hypermatch/autodiff.hpp"
#include "hypermatch/hyperbolic.hpp"
#include "hypermatch/tensor.hpp"

namespace hypermatch {

inline constexpr std::size_t kMaxSequenceLength = 512;

/// Per-token stack of per-layer hidden vectors, stored [M, L, d_r].
class LayeredTokenEmbeddings {
 public:
  LayeredTokenEmbeddings() = default;
  /// Throws InvalidArgument on a non-rank-3 tensor, more than 512 tokens or
  /// non-finite entries.
  explicit LayeredTokenEmbeddings(Tensor values);

  std::size_t tokens() const noexcept { return values_.rank() == 3 ? values_.shape()[0] : 0; }
  std::size_t layers() const noexcept { return values_.rank() == 3 ? values_.shape()[1] : 0; }
  std::size_t hidden() const noexcept { return values_.rank() == 3 ? values_.shape()[2] : 0; }

  const Tensor& tensor() const noexcept { return values_; }
  /// The L x d_r block of token i.
  std::span<const double> token(std::size_t i) const;

  /// First `m` tokens.
  LayeredTokenEmbeddings truncated(std::size_t m) const;

 private:
  Tensor values_;
};

/// One mixed vector per token, [M, d_r].
struct MixedTokenEmbeddings {
  Tensor values;

  std::size_t tokens() const noexcept { return values.rows(); }
  std::size_t hidden() const noexcept { return values.cols(); }
};

struct MixingParameters {
  Tensor v_a;  // [d_r]
  Tensor w_a;  // [d_r, d_r]
};

/// One convolution bank per phrase length n = 1..N.
struct PhraseBankParameters {
  std::vector<Tensor> filters;  // filters[n-1]: [n, d_r, d_h]
  std::vector<Tensor> biases;   // empty, or biases[n-1]: [d_h]

  std::size_t max_length() const noexcept { return filters.size(); }
  std::size_t output_dim() const;
};

struct DocumentEncoderParameters {
  Tensor w_h;  // [d_r, d_h]
};

/// Softmax layer weights per token, [M, L].
Tensor mixing_weights(const LayeredTokenEmbeddings& layers, const MixingParameters& params);

/// mixed_i = W_a (sum_l alpha_il h_il) with alpha_i = softmax_l(<h_il, V_a>).
MixedTokenEmbeddings adaptive_mix(const LayeredTokenEmbeddings& layers, const MixingParameters& params);

/// The last layer of every token, with no mixing.
MixedTokenEmbeddings last_layer(const LayeredTokenEmbeddings& layers);

/// Phrase points keyed by (start, length).
class PhraseEncodings {
 public:
  void insert(std::size_t start, std::size_t length, PoincarePoint point);
  const PoincarePoint& at(std::size_t start, std::size_t length) const;
  bool contains(std::size_t start, std::size_t length) const;
  std::size_t size() const noexcept { return points_.size(); }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

 private:
  std::map<std::pair<std::size_t, std::size_t>, PoincarePoint> points_;
};

/// exp_0(CNN^n(mixed[start : start + n])).
PoincarePoint encode_phrase(const MixedTokenEmbeddings& mixed, const PhraseBankParameters& bank, Curvature c,
                            std::size_t start, std::size_t length);

/// All spans with length <= bank.max_length().
PhraseEncodings encode_phrases(const MixedTokenEmbeddings& mixed, const PhraseBankParameters& bank, Curvature c);

/// Einstein midpoint of exp_0(mixed_i W_h) over all tokens.
PoincarePoint encode_document(const MixedTokenEmbeddings& mixed, const DocumentEncoderParameters& params,
                              Curvature c);

// ---- graph versions ---------------------------------------------------------

namespace autodiff {

/// layers: [M, L, d_r]; v_a: [d_r]; w_a: [d_r, d_r]. Returns [M, d_r].
Var adaptive_mix(Var layers, Var v_a, Var w_a);
/// Last layer of [M, L, d_r] as [M, d_r].
Var last_layer(Var layers);
/// Phrase points for the given starts of one length, as [starts, d_h].
Var encode_phrases(Var mixed, Var filter, Var bias, const std::vector<std::size_t>& starts, double c);
/// Document point as [1, d_h].
Var encode_document(Var mixed, Var w_h, double c);

}  // namespace autodiff

}  // namespace hypermatch
