#include "hypermatch/encoders.hpp"

#include <string>

#include "hypermatch/error.hpp"
#include "hypermatch/hyperbolic_graph.hpp"
#include "hypermatch/kernels.hpp"

namespace hypermatch {

LayeredTokenEmbeddings::LayeredTokenEmbeddings(Tensor values) : values_(std::move(values)) {
  if (values_.rank() != 3) {
    throw InvalidArgument("layered embeddings must be [M, L, d_r], got " + shape_string(values_.shape()));
  }
  if (tokens() > kMaxSequenceLength) {
    throw InvalidArgument("layered embeddings exceed the maximum sequence length (" + std::to_string(tokens()) + ")");
  }
  if (layers() == 0 || hidden() == 0) throw InvalidArgument("layered embeddings need L >= 1 and d_r >= 1");
  if (!values_.all_finite()) throw InvalidArgument("layered embeddings contain non-finite values");
}

std::span<const double> LayeredTokenEmbeddings::token(std::size_t i) const {
  const std::size_t block = layers() * hidden();
  return values_.values().subspan(i * block, block);
}

LayeredTokenEmbeddings LayeredTokenEmbeddings::truncated(std::size_t m) const {
  if (m >= tokens()) return *this;
  const std::size_t block = layers() * hidden();
  std::vector<double> v(values_.values().begin(), values_.values().begin() + static_cast<std::ptrdiff_t>(m * block));
  return LayeredTokenEmbeddings(Tensor({m, layers(), hidden()}, std::move(v)));
}

std::size_t PhraseBankParameters::output_dim() const {
  if (filters.empty()) throw InvalidArgument("phrase bank has no filters");
  return filters.front().shape()[2];
}

namespace {

void check_mixing_shapes(const LayeredTokenEmbeddings& layers, const MixingParameters& params) {
  const std::size_t d = layers.hidden();
  if (params.v_a.size() != d || params.w_a.rank() != 2 || params.w_a.shape()[0] != d || params.w_a.shape()[1] != d) {
    throw InvalidArgument("adaptive_mix: parameters " + shape_string(params.v_a.shape()) + "/" +
                          shape_string(params.w_a.shape()) + " do not fit hidden size " + std::to_string(d));
  }
}

}  // namespace

Tensor mixing_weights(const LayeredTokenEmbeddings& layers, const MixingParameters& params) {
  check_mixing_shapes(layers, params);
  const std::size_t m = layers.tokens(), l = layers.layers(), d = layers.hidden();
  Tensor alpha({m, l});
  for (std::size_t i = 0; i < m; ++i) {
    const auto block = layers.token(i);
    for (std::size_t j = 0; j < l; ++j) alpha.at(i, j) = kernels::dot(block.subspan(j * d, d), params.v_a.values());
    kernels::softmax(alpha.row(i), alpha.row(i));
  }
  return alpha;
}

MixedTokenEmbeddings adaptive_mix(const LayeredTokenEmbeddings& layers, const MixingParameters& params) {
  const Tensor alpha = mixing_weights(layers, params);
  const std::size_t m = layers.tokens(), d = layers.hidden();
  Tensor mixed({m, d});
  std::vector<double> pooled(d);
  for (std::size_t i = 0; i < m; ++i) {
    kernels::weighted_layer_sum(layers.token(i), alpha.row(i), d, pooled);
    kernels::matmul_nt(pooled, params.w_a.values(), 1, d, d, mixed.row(i));
  }
  return {std::move(mixed)};
}

MixedTokenEmbeddings last_layer(const LayeredTokenEmbeddings& layers) {
  const std::size_t m = layers.tokens(), l = layers.layers(), d = layers.hidden();
  Tensor mixed({m, d});
  for (std::size_t i = 0; i < m; ++i) {
    const auto block = layers.token(i).subspan((l - 1) * d, d);
    std::copy(block.begin(), block.end(), mixed.row(i).begin());
  }
  return {std::move(mixed)};
}

void PhraseEncodings::insert(std::size_t start, std::size_t length, PoincarePoint point) {
  points_.insert_or_assign({start, length}, std::move(point));
}

const PoincarePoint& PhraseEncodings::at(std::size_t start, std::size_t length) const {
  auto it = points_.find({start, length});
  if (it == points_.end()) {
    throw NotFound("no phrase encoding for span (" + std::to_string(start) + ", " + std::to_string(length) + ")");
  }
  return it->second;
}

bool PhraseEncodings::contains(std::size_t start, std::size_t length) const {
  return points_.contains({start, length});
}

PoincarePoint encode_phrase(const MixedTokenEmbeddings& mixed, const PhraseBankParameters& bank, Curvature c,
                            std::size_t start, std::size_t length) {
  if (length == 0 || length > bank.max_length() || start + length > mixed.tokens()) {
    throw InvalidArgument("encode_phrase: span (" + std::to_string(start) + ", " + std::to_string(length) +
                          ") out of bounds for " + std::to_string(mixed.tokens()) + " tokens and N = " +
                          std::to_string(bank.max_length()));
  }
  const Tensor& w = bank.filters[length - 1];
  const std::size_t d_in = mixed.hidden();
  if (w.rank() != 3 || w.shape()[0] != length || w.shape()[1] != d_in) {
    throw InvalidArgument("encode_phrase: filter bank " + std::to_string(length) + " has shape " +
                          shape_string(w.shape()));
  }
  const std::size_t d_out = w.shape()[2];
  const std::span<const double> bias =
      bank.biases.empty() ? std::span<const double>() : bank.biases[length - 1].values();
  std::vector<double> row(d_out);
  kernels::conv1d_row(mixed.values.values(), d_in, start, length, w.values(), d_out, bias, row);
  return exp_map0(row, c);
}

PhraseEncodings encode_phrases(const MixedTokenEmbeddings& mixed, const PhraseBankParameters& bank, Curvature c) {
  PhraseEncodings out;
  for (std::size_t n = 1; n <= bank.max_length(); ++n) {
    for (std::size_t i = 0; i + n <= mixed.tokens(); ++i) out.insert(i, n, encode_phrase(mixed, bank, c, i, n));
  }
  return out;
}

PoincarePoint encode_document(const MixedTokenEmbeddings& mixed, const DocumentEncoderParameters& params,
                              Curvature c) {
  const std::size_t m = mixed.tokens(), d_in = mixed.hidden();
  if (m == 0) throw InvalidArgument("encode_document: empty document");
  if (params.w_h.rank() != 2 || params.w_h.shape()[0] != d_in) {
    throw InvalidArgument("encode_document: W_h shape " + shape_string(params.w_h.shape()) +
                          " does not fit hidden size " + std::to_string(d_in));
  }
  const std::size_t d_out = params.w_h.shape()[1];
  std::vector<PoincarePoint> lifted;
  lifted.reserve(m);
  std::vector<double> row(d_out);
  for (std::size_t i = 0; i < m; ++i) {
    kernels::matmul(mixed.values.row(i), params.w_h.values(), 1, d_in, d_out, row);
    lifted.push_back(exp_map0(row, c));
  }
  return hyper_average(lifted);
}

namespace autodiff {

Var adaptive_mix(Var layers, Var v_a, Var w_a) {
  const Shape& s = layers.shape();
  if (s.size() != 3) throw InvalidArgument("adaptive_mix: layers must be [M, L, d_r]");
  const std::size_t m = s[0], l = s[1], d = s[2];
  const Var logits = reshape(matmul(reshape(layers, {m * l, d}), reshape(v_a, {d, 1})), {m, l});
  const Var alpha = softmax_rows(logits);
  return matmul_nt(weighted_layer_sum(layers, alpha), w_a);
}

Var last_layer(Var layers) {
  const Shape& s = layers.shape();
  if (s.size() != 3) throw InvalidArgument("last_layer: layers must be [M, L, d_r]");
  const std::size_t m = s[0], l = s[1], d = s[2];
  std::vector<std::size_t> rows(m);
  for (std::size_t i = 0; i < m; ++i) rows[i] = i * l + (l - 1);
  return gather_rows(reshape(layers, {m * l, d}), std::move(rows));
}

Var encode_phrases(Var mixed, Var filter, Var bias, const std::vector<std::size_t>& starts, double c) {
  return exp0_rows(gather_rows(conv1d(mixed, filter, bias), starts), c);
}

Var encode_document(Var mixed, Var w_h, double c) { return einstein_midpoint(exp0_rows(matmul(mixed, w_h), c), c); }

}  // namespace autodiff

}  // namespace hypermatch
