#include <gtest/gtest.h>

#include <cmath>

#include "hypermatch/encoders.hpp"
#include "hypermatch/error.hpp"
#include "hypermatch/rng.hpp"
#include "test_support.hpp"

namespace hypermatch {
namespace {

Tensor random_tensor(Rng& rng, Shape shape, double scale) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.gaussian(0.0, 1.0);
  return t;
}

Tensor identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

TEST(LayeredTokenEmbeddings, ValidatesShapeAndValues) {
  EXPECT_THROW(LayeredTokenEmbeddings(Tensor({2, 3})), InvalidArgument);
  EXPECT_THROW(LayeredTokenEmbeddings(Tensor({513, 1, 1})), InvalidArgument);
  Tensor bad({1, 1, 2});
  bad[1] = std::nan("");
  EXPECT_THROW(LayeredTokenEmbeddings{bad}, InvalidArgument);
  const LayeredTokenEmbeddings ok(Tensor({512, 2, 3}));
  EXPECT_EQ(ok.tokens(), 512u);
  EXPECT_EQ(ok.truncated(10).tokens(), 10u);
}

TEST(AdaptiveMix, SingleLayerIsPlainProjection) {
  const LayeredTokenEmbeddings h(Tensor({1, 1, 2}, {1.0, 2.0}));
  const MixingParameters p{Tensor::vector({0.3, -0.1}), Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0})};
  EXPECT_EQ(mixing_weights(h, p).values()[0], 1.0);
  const auto mixed = adaptive_mix(h, p);
  EXPECT_DOUBLE_EQ(mixed.values[0], 5.0);
  EXPECT_DOUBLE_EQ(mixed.values[1], 11.0);
}

TEST(AdaptiveMix, IdenticalLayersIgnoreTheAttentionVector) {
  const LayeredTokenEmbeddings h(Tensor({1, 3, 2}, {0.5, -1.0, 0.5, -1.0, 0.5, -1.0}));
  const Tensor w = Tensor::matrix(2, 2, {2.0, 0.0, 1.0, 1.0});
  for (double v : {-3.0, 0.0, 7.0}) {
    const auto mixed = adaptive_mix(h, MixingParameters{Tensor::vector({v, 1.0}), w});
    EXPECT_NEAR(mixed.values[0], 1.0, 1e-15);
    EXPECT_NEAR(mixed.values[1], -0.5, 1e-15);
  }
}

TEST(AdaptiveMix, HandComputedSoftmax) {
  // Logits ln 2 and 0 give weights 2/3 and 1/3.
  const LayeredTokenEmbeddings h(Tensor({1, 2, 1}, {std::log(2.0), 0.0}));
  const MixingParameters p{Tensor::vector({1.0}), Tensor::matrix(1, 1, {1.0})};
  const Tensor alpha = mixing_weights(h, p);
  EXPECT_NEAR(alpha[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(alpha[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(adaptive_mix(h, p).values[0], 2.0 / 3.0 * std::log(2.0), 1e-15);
}

TEST(LastLayer, SelectsFinalLayer) {
  const LayeredTokenEmbeddings h(Tensor({2, 2, 1}, {1.0, 2.0, 3.0, 4.0}));
  const auto m = last_layer(h);
  EXPECT_EQ(m.values, Tensor::matrix(2, 1, {2.0, 4.0}));
}

TEST(PhraseEncoder, ZeroFiltersGiveOrigin) {
  MixedTokenEmbeddings mixed{Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6})};
  PhraseBankParameters bank;
  bank.filters = {Tensor({1, 2, 2}), Tensor({2, 2, 2})};
  const auto all = encode_phrases(mixed, bank, Curvature(1.0));
  EXPECT_EQ(all.size(), 5u);
  for (const auto& [span, point] : all) EXPECT_EQ(kernels::norm(point.coords()), 0.0);
}

TEST(PhraseEncoder, IdentityFilterGivesExpOfToken) {
  MixedTokenEmbeddings mixed{Tensor::matrix(2, 2, {0.3, 0.4, -1.0, 2.0})};
  PhraseBankParameters bank;
  bank.filters = {identity(2).reshaped({1, 2, 2})};
  const double c = 0.5;
  const auto p = encode_phrase(mixed, bank, Curvature(c), 1, 1);
  const double n = std::sqrt(5.0);
  EXPECT_NEAR(kernels::norm(p.coords()), std::tanh(std::sqrt(c) * n) / std::sqrt(c), 1e-15);
  EXPECT_NEAR(p[1] / p[0], -2.0, 1e-14);
}

TEST(PhraseEncoder, DependsOnlyOnTheWindow) {
  Rng rng(1);
  PhraseBankParameters bank;
  bank.filters = {random_tensor(rng, {1, 3, 2}, 0.3), random_tensor(rng, {2, 3, 2}, 0.3)};
  Tensor a = random_tensor(rng, {4, 3}, 1.0);
  Tensor b = random_tensor(rng, {5, 3}, 1.0);
  for (std::size_t k = 0; k < 3; ++k) {
    b.at(3, k) = a.at(1, k);
    b.at(4, k) = a.at(2, k);
  }
  const auto pa = encode_phrase({a}, bank, Curvature(1.0), 1, 2);
  const auto pb = encode_phrase({b}, bank, Curvature(1.0), 3, 2);
  EXPECT_EQ(std::vector<double>(pa.coords().begin(), pa.coords().end()),
            std::vector<double>(pb.coords().begin(), pb.coords().end()));
}

TEST(PhraseEncoder, OutOfRangeSpanThrows) {
  MixedTokenEmbeddings mixed{Tensor::matrix(2, 1, {1, 2})};
  PhraseBankParameters bank;
  bank.filters = {Tensor({1, 1, 1})};
  EXPECT_THROW(encode_phrase(mixed, bank, Curvature(1.0), 2, 1), InvalidArgument);
  EXPECT_THROW(encode_phrase(mixed, bank, Curvature(1.0), 0, 2), InvalidArgument);
  EXPECT_THROW(encode_phrases(mixed, bank, Curvature(1.0)).at(0, 2), NotFound);
}

TEST(DocumentEncoder, SingleTokenIsItsLiftedPoint) {
  MixedTokenEmbeddings mixed{Tensor::matrix(1, 2, {0.3, -0.6})};
  const DocumentEncoderParameters p{identity(2)};
  const auto doc = encode_document(mixed, p, Curvature(1.0));
  const auto lifted = exp_map0(std::vector<double>{0.3, -0.6}, Curvature(1.0));
  EXPECT_NEAR(doc[0], lifted[0], 1e-15);
  EXPECT_NEAR(doc[1], lifted[1], 1e-15);
}

TEST(DocumentEncoder, IdenticalTokensGiveCommonPoint) {
  MixedTokenEmbeddings mixed{Tensor::matrix(3, 2, {0.3, -0.6, 0.3, -0.6, 0.3, -0.6})};
  const auto doc = encode_document(mixed, {identity(2)}, Curvature(1.0));
  const auto lifted = exp_map0(std::vector<double>{0.3, -0.6}, Curvature(1.0));
  EXPECT_NEAR(doc[0], lifted[0], 1e-15);
  EXPECT_NEAR(doc[1], lifted[1], 1e-15);
}

TEST(DocumentEncoder, OpposedTokensGiveOrigin) {
  MixedTokenEmbeddings mixed{Tensor::matrix(2, 2, {0.3, -0.6, -0.3, 0.6})};
  const auto doc = encode_document(mixed, {identity(2)}, Curvature(1.0));
  EXPECT_LE(kernels::norm(doc.coords()), 1e-12);
}

TEST(EncodersGraph, MatchEagerBitForBit) {
  Rng rng(9);
  const std::size_t m = 6, l = 3, d = 4, dh = 3;
  const LayeredTokenEmbeddings h(random_tensor(rng, {m, l, d}, 0.5));
  const MixingParameters mix{random_tensor(rng, {d}, 0.5), random_tensor(rng, {d, d}, 0.5)};
  PhraseBankParameters bank;
  bank.filters = {random_tensor(rng, {1, d, dh}, 0.3), random_tensor(rng, {2, d, dh}, 0.3)};
  bank.biases = {random_tensor(rng, {dh}, 0.1), random_tensor(rng, {dh}, 0.1)};
  const DocumentEncoderParameters docp{random_tensor(rng, {d, dh}, 0.3)};
  const double c = 0.8;

  const auto mixed = adaptive_mix(h, mix);
  autodiff::Graph g;
  const autodiff::Var hv = g.constant(h.tensor());
  const autodiff::Var mv = autodiff::adaptive_mix(hv, g.constant(mix.v_a), g.constant(mix.w_a));
  EXPECT_EQ(mv.value().storage(), mixed.values.storage());

  const std::vector<std::size_t> starts = {0, 2, 4};
  const autodiff::Var ph =
      autodiff::encode_phrases(mv, g.constant(bank.filters[1]), g.constant(bank.biases[1]), starts, c);
  for (std::size_t r = 0; r < starts.size(); ++r) {
    const auto p = encode_phrase(mixed, bank, Curvature(c), starts[r], 2);
    for (std::size_t k = 0; k < dh; ++k) EXPECT_EQ(ph.value().at(r, k), p[k]);
  }

  const autodiff::Var dv = autodiff::encode_document(mv, g.constant(docp.w_h), c);
  const auto doc = encode_document(mixed, docp, Curvature(c));
  for (std::size_t k = 0; k < dh; ++k) EXPECT_EQ(dv.value().at(0, k), doc[k]);

  const autodiff::Var last = autodiff::last_layer(hv);
  EXPECT_EQ(last.value().storage(), last_layer(h).values.storage());
}

}  // namespace
}  // namespace hypermatch
