#include <gtest/gtest.h>

#include <cmath>

#include "hypermatch/error.hpp"
#include "hypermatch/matching.hpp"

namespace hypermatch {
namespace {

HyperbolicScorerParameters scorer(std::vector<double> w, double bias, bool use_bias = true) {
  const std::size_t d = w.size();
  return {Tensor::matrix(d, 1, std::move(w)), Tensor::vector({bias}), use_bias};
}

TEST(RelevanceConfig, ScaledQuantities) {
  RelevanceConfig cfg{0.5, 4, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(cfg.scaled_margin(), 0.5);
  EXPECT_DOUBLE_EQ(cfg.distance_weight(), 0.25);
  EXPECT_THROW((RelevanceConfig{1.5, 4, 1.0, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((RelevanceConfig{0.5, 0, 1.0, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((RelevanceConfig{0.5, 4, 0.0, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((RelevanceConfig{0.5, 4, 1.0, -1.0}.validate()), InvalidArgument);
}

TEST(ScorerFc, MatchesHighPrecisionReference) {
  const Curvature c(0.5);
  const double f = f_c_scalar(PoincarePoint({0.3, 0.0}, c), scorer({0.4, 0.7}, 0.2));
  EXPECT_NEAR(f, 0.32185021891065441058, 1e-14);
}

TEST(ScorerFc, WithoutBiasIsLinearInAtanhSpace) {
  // In one dimension, log_0(W (x)_c x) reduces to the tangent image of x
  // scaled by |W^T x| / |x|.
  const Curvature c(1.0);
  const double f = f_c_scalar(PoincarePoint({0.3, 0.0}, c), scorer({0.5, 0.9}, 0.7, false));
  EXPECT_NEAR(f, 0.5 * std::atanh(0.3), 1e-14);
}

TEST(ScorerFc, OriginPhraseGivesBias) {
  const double f = f_c_scalar(PoincarePoint::origin(2, Curvature(1.0)), scorer({0.5, 0.9}, 0.3));
  EXPECT_NEAR(f, 0.3, 1e-14);
}

TEST(Relevance, DistanceOnlyMatchesReference) {
  RelevanceConfig cfg{1.0, 4, 1.0, 1.0};
  const Curvature c(1.0);
  const double s = relevance(PoincarePoint::origin(2, c), PoincarePoint({0.5, 0.0}, c), scorer({1.0, 1.0}, 0.0), cfg);
  EXPECT_NEAR(s, -0.60347448040629098892, 1e-14);
}

TEST(Relevance, FromPartsCombination) {
  RelevanceConfig cfg{0.25, 16, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(relevance_from_parts(2.0, 2.0, cfg), 0.75 * 2.0 - 0.25 * 4.0 / 4.0);
  cfg.lambda = 0.0;
  EXPECT_DOUBLE_EQ(relevance_from_parts(2.0, 100.0, cfg), 2.0);
}

TEST(Relevance, EuclideanLimitUsesTwiceTheDistance) {
  const Curvature c(0.0);
  EXPECT_DOUBLE_EQ(hyperbolic_distance(PoincarePoint({0.0, 0.0}, c), PoincarePoint({3.0, 4.0}, c)), 10.0);
}

TEST(TripletLoss, HandComputedHinges) {
  const RelevanceConfig d1{0.5, 1, 1.0, 1.0};
  const RelevanceConfig d4{0.5, 4, 1.0, 1.0};
  EXPECT_EQ(*triplet_loss(std::vector<double>{2.0}, std::vector<double>{0.5}, d1), 0.0);
  EXPECT_EQ(*triplet_loss(std::vector<double>{0.7}, std::vector<double>{0.7}, d4), 0.5);
  EXPECT_DOUBLE_EQ(*triplet_loss(std::vector<double>{0.1}, std::vector<double>{0.3}, d1), 1.2);
}

TEST(TripletLoss, MeanOverAllPairs) {
  const RelevanceConfig cfg{0.5, 1, 1.0, 1.0};
  // Pairs: (1,0)->0, (1,0.5)->0.5, (0,0)->1, (0,0.5)->1.5.
  EXPECT_DOUBLE_EQ(*triplet_loss(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 0.5}, cfg), 0.75);
}

TEST(TripletLoss, MarginScalesWithDimension) {
  const std::vector<double> zero = {0.0};
  for (std::size_t d : {1u, 4u, 768u}) {
    const RelevanceConfig cfg{0.5, d, 1.0, 1.0};
    EXPECT_DOUBLE_EQ(*triplet_loss(zero, zero, cfg), 1.0 / std::sqrt(static_cast<double>(d))) << d;
  }
}

TEST(TripletLoss, ScalingDimensionByKSquaredScalesLossByOneOverK) {
  // With lambda = 1 the scores are -d^2/sqrt(d_h), so every hinge term
  // carries the same 1/sqrt(d_h) factor.
  const std::vector<double> pos_d = {0.4, 0.9}, neg_d = {0.5, 0.3, 1.1};
  auto loss = [&](std::size_t d_h) {
    const RelevanceConfig cfg{1.0, d_h, 1.0, 1.0};
    std::vector<double> pos, neg;
    for (double d : pos_d) pos.push_back(relevance_from_parts(0.0, d, cfg));
    for (double d : neg_d) neg.push_back(relevance_from_parts(0.0, d, cfg));
    return *triplet_loss(pos, neg, cfg);
  };
  for (std::size_t k : {2u, 3u, 16u}) {
    EXPECT_NEAR(loss(4 * k * k), loss(4) / static_cast<double>(k), 1e-15) << k;
    const RelevanceConfig a{0.5, 4, 1.0, 1.0}, b{0.5, 4 * k * k, 1.0, 1.0};
    EXPECT_NEAR(b.scaled_margin(), a.scaled_margin() / static_cast<double>(k), 1e-16);
    EXPECT_NEAR(b.distance_weight(), a.distance_weight() / static_cast<double>(k), 1e-16);
  }
}

TEST(TripletLoss, EmptySideGivesNothing) {
  const RelevanceConfig cfg{};
  EXPECT_FALSE(triplet_loss(std::vector<double>{}, std::vector<double>{1.0}, cfg).has_value());
  EXPECT_FALSE(triplet_loss(std::vector<double>{1.0}, std::vector<double>{}, cfg).has_value());
}

TEST(TripletLoss, GraphMatchesEager) {
  const RelevanceConfig cfg{0.5, 4, 1.0, 1.0};
  autodiff::Graph g;
  const auto pos = g.constant(Tensor::vector({0.3, -0.2}));
  const auto neg = g.constant(Tensor::vector({0.1, 0.4, -0.5}));
  const auto l = autodiff::triplet_loss(pos, neg, cfg);
  EXPECT_EQ(l.value()[0], *triplet_loss(std::vector<double>{0.3, -0.2}, std::vector<double>{0.1, 0.4, -0.5}, cfg));
}

TEST(ScorerFc, GraphMatchesEager) {
  const double c = 0.5;
  autodiff::Graph g;
  const auto rows = g.constant(Tensor::matrix(2, 2, {0.3, 0.0, -0.2, 0.5}));
  const auto s = scorer({0.4, 0.7}, 0.2);
  const auto f = autodiff::f_c_rows(rows, g.constant(s.weight), g.constant(s.bias), c);
  EXPECT_EQ(f.value()[0], f_c_scalar(PoincarePoint({0.3, 0.0}, Curvature(c)), s));
  EXPECT_EQ(f.value()[1], f_c_scalar(PoincarePoint({-0.2, 0.5}, Curvature(c)), s));
}

ScoredCandidate cand(std::size_t start, std::size_t length, std::string stem, double score) {
  return {start, length, {stem}, {stem}, score};
}

TEST(Ranking, DescendingScoreWithTieBreaks) {
  const auto r = rank_candidates("d", {cand(0, 1, "a", 0.1), cand(3, 1, "b", 0.9), cand(2, 2, "c", 0.5),
                                       cand(1, 1, "e", 0.5), cand(1, 2, "f", 0.5)});
  ASSERT_EQ(r.ranked.size(), 5u);
  EXPECT_EQ(r.ranked[0].surface[0], "b");
  EXPECT_EQ(r.ranked[1].surface[0], "e");
  EXPECT_EQ(r.ranked[2].surface[0], "f");
  EXPECT_EQ(r.ranked[3].surface[0], "c");
  EXPECT_EQ(r.ranked[4].surface[0], "a");
}

TEST(Ranking, KeepsBestInstanceOfEachStem) {
  const auto r = rank_candidates("d", {cand(0, 1, "a", 0.1), cand(4, 1, "a", 0.8)});
  ASSERT_EQ(r.ranked.size(), 1u);
  EXPECT_EQ(r.ranked[0].start, 4u);
}

TEST(Ranking, NonFiniteScoreThrows) {
  EXPECT_THROW(rank_candidates("d", {cand(0, 1, "a", std::nan(""))}), NumericFailure);
}

}  // namespace
}  // namespace hypermatch
