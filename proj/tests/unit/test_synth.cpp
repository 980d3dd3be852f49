#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "hypermatch/porter.hpp"
#include "hypermatch/synth.hpp"

namespace hypermatch {
namespace {

TEST(SynthEmbeddings, SameTokenSameBlock) {
  const CorpusRecord doc{"d", {"alpha", "beta", "alpha"}, {}};
  const auto e = synth_embeddings(doc, 3, 5, 7);
  ASSERT_EQ(e.tensor().shape(), (Shape{3, 3, 5}));
  const auto a = e.token(0), b = e.token(1), c = e.token(2);
  EXPECT_TRUE(std::equal(a.begin(), a.end(), c.begin()));
  EXPECT_FALSE(std::equal(a.begin(), a.end(), b.begin()));
  const CorpusRecord other{"e", {"gamma", "alpha"}, {}};
  const auto f = synth_embeddings(other, 3, 5, 7).token(1);
  EXPECT_TRUE(std::equal(a.begin(), a.end(), f.begin()));
}

TEST(SynthEmbeddings, SeedsDiffer) {
  EXPECT_NE(synth_value("alpha", 0, 0, 8, 1), synth_value("alpha", 0, 0, 8, 2));
  EXPECT_EQ(synth_value("alpha", 1, 3, 8, 1), synth_value("alpha", 1, 3, 8, 1));
}

TEST(SynthEmbeddings, VarianceIsOneOverHidden) {
  const std::size_t hidden = 64;
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (int t = 0; t < 400; ++t) {
    for (std::size_t l = 0; l < 4; ++l) {
      for (std::size_t k = 0; k < hidden; ++k) {
        const double v = synth_value("tok" + std::to_string(t), l, k, hidden, 3);
        sum += v;
        sq += v * v;
        ++n;
      }
    }
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - mean * mean;
  EXPECT_NEAR(var, 1.0 / hidden, 0.05 / hidden);
}

TEST(SynthEmbeddings, OnlyFirst512Tokens) {
  CorpusRecord doc{"d", {}, {}};
  for (int i = 0; i < 600; ++i) doc.tokens.push_back("w" + std::to_string(i));
  EXPECT_EQ(synth_embeddings(doc, 1, 2, 1).tokens(), 512u);
}

TEST(PseudoWords, StemToThemselvesAndAreDistinct) {
  const auto words = pseudo_words(200, 5);
  ASSERT_EQ(words.size(), 200u);
  std::set<std::string> stems;
  for (const auto& w : words) {
    EXPECT_EQ(porter_stem(w), w);
    stems.insert(w);
  }
  EXPECT_EQ(stems.size(), 200u);
}

TEST(SynthCorpus, PlantsGoldPhrasesVerbatim) {
  SynthCorpusConfig cfg;
  cfg.documents = 20;
  const auto docs = synth_corpus(cfg);
  ASSERT_EQ(docs.size(), 20u);
  std::set<std::string> ids;
  for (const auto& d : docs) {
    ids.insert(d.id);
    EXPECT_GE(d.gold.size(), cfg.min_gold);
    EXPECT_LE(d.gold.size(), cfg.max_gold);
    for (const auto& g : d.gold) {
      EXPECT_LE(g.size(), cfg.max_phrase_tokens);
      EXPECT_NE(std::search(d.tokens.begin(), d.tokens.end(), g.begin(), g.end()), d.tokens.end());
    }
  }
  EXPECT_EQ(ids.size(), 20u);
}

TEST(SynthCorpus, DeterministicInSeed) {
  SynthCorpusConfig cfg;
  cfg.documents = 5;
  const auto a = synth_corpus(cfg), b = synth_corpus(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].tokens, b[i].tokens);
  cfg.seed = 8;
  EXPECT_NE(synth_corpus(cfg)[0].tokens, a[0].tokens);
}

}  // namespace
}  // namespace hypermatch
