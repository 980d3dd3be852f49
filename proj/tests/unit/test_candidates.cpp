#include <gtest/gtest.h>

#include <set>

#include "hypermatch/candidates.hpp"
#include "hypermatch/error.hpp"
#include "hypermatch/porter.hpp"
#include "hypermatch/rng.hpp"

namespace hypermatch {
namespace {

struct StemCase {
  const char* word;
  const char* stem;
};

// Reference stems from NLTK's PorterStemmer in MARTIN_EXTENSIONS mode, which
// reproduces the reference C implementation.
const StemCase kStems[] = {
    {"regions", "region"},   {"a", "a"},
    {"extraction", "extract"}, {"caresses", "caress"},
    {"ponies", "poni"},      {"ties", "ti"},
    {"caress", "caress"},    {"cats", "cat"},
    {"feed", "feed"},        {"agreed", "agre"},
    {"plastered", "plaster"}, {"bled", "bled"},
    {"motoring", "motor"},   {"sing", "sing"},
    {"conflated", "conflat"}, {"troubled", "troubl"},
    {"sized", "size"},       {"hopping", "hop"},
    {"tanned", "tan"},       {"falling", "fall"},
    {"hissing", "hiss"},     {"fizzed", "fizz"},
    {"failing", "fail"},     {"filing", "file"},
    {"happy", "happi"},      {"sky", "sky"},
    {"relational", "relat"}, {"conditional", "condit"},
    {"rational", "ration"},  {"valenci", "valenc"},
    {"hesitanci", "hesit"},  {"digitizer", "digit"},
    {"conformabli", "conform"}, {"radicalli", "radic"},
    {"differentli", "differ"}, {"vileli", "vile"},
    {"analogousli", "analog"}, {"vietnamization", "vietnam"},
    {"predication", "predic"}, {"operator", "oper"},
    {"feudalism", "feudal"}, {"decisiveness", "decis"},
    {"hopefulness", "hope"}, {"callousness", "callous"},
    {"formaliti", "formal"}, {"sensitiviti", "sensit"},
    {"sensibiliti", "sensibl"}, {"triplicate", "triplic"},
    {"formative", "form"},   {"formalize", "formal"},
    {"electriciti", "electr"}, {"electrical", "electr"},
    {"hopeful", "hope"},     {"goodness", "good"},
    {"revival", "reviv"},    {"allowance", "allow"},
    {"inference", "infer"},  {"airliner", "airlin"},
    {"gyroscopic", "gyroscop"}, {"adjustable", "adjust"},
    {"defensible", "defens"}, {"irritant", "irrit"},
    {"replacement", "replac"}, {"adjustment", "adjust"},
    {"dependent", "depend"}, {"adoption", "adopt"},
    {"homologou", "homolog"}, {"communism", "commun"},
    {"activate", "activ"},   {"angulariti", "angular"},
    {"homologous", "homolog"}, {"effective", "effect"},
    {"bowdlerize", "bowdler"}, {"probate", "probat"},
    {"rate", "rate"},        {"cease", "ceas"},
    {"controll", "control"}, {"roll", "roll"},
    {"generalizations", "gener"}, {"oscillators", "oscil"},
    {"keyphrases", "keyphras"}, {"hyperbolic", "hyperbol"},
    {"matching", "match"},   {"documents", "document"},
    {"phrases", "phrase"},   {"embeddings", "embed"},
    {"encoding", "encod"},   {"neural", "neural"},
    {"networks", "network"}, {"logi", "logi"},
    {"bli", "bli"},          {"abli", "abli"},
};

TEST(Porter, ReferenceVocabulary) {
  for (const auto& c : kStems) EXPECT_EQ(porter_stem(c.word), c.stem) << c.word;
}

TEST(Porter, NonAlphabeticWordsPassThrough) {
  EXPECT_EQ(porter_stem("3d"), "3d");
  EXPECT_EQ(porter_stem("Regions"), "Regions");
  EXPECT_EQ(porter_stem(""), "");
}

TEST(Porter, StemTokensLowercasesFirst) {
  EXPECT_EQ(stem_tokens({"Regions", "EXTRACTION"}), (std::vector<std::string>{"region", "extract"}));
}

TEST(Porter, IdempotentOnTheTestVocabulary) {
  // Not true of every word ("embeddings" -> "embed" -> "emb").
  for (const char* w : {"regions",     "extraction",  "caresses", "ponies",    "cats",       "feed",
                        "plastered",   "motoring",    "sing",     "hopping",   "falling",    "hissing",
                        "relational",  "conditional", "digitizer", "operator", "feudalism",  "hopefulness",
                        "goodness",    "allowance",   "inference", "adjustable", "replacement", "adoption",
                        "effective",   "matching",    "documents", "phrases",  "networks",   "neural",
                        "hyperbolic"}) {
    const auto s = porter_stem(w);
    EXPECT_EQ(porter_stem(s), s);
  }
}

Document doc(std::vector<std::string> tokens, std::vector<TokenSeq> gold = {}) {
  return Document{"d", std::move(tokens), std::move(gold)};
}

TEST(Candidates, SingleTokenLongMaxLength) {
  const auto c = extract_candidates(doc({"a"}), 5);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].surface, TokenSeq({"a"}));
}

TEST(Candidates, TwoTokensUpToBigrams) {
  const auto c = extract_candidates(doc({"a", "b"}), 2);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].surface, TokenSeq({"a"}));
  EXPECT_EQ(c[1].surface, TokenSeq({"a", "b"}));
  EXPECT_EQ(c[2].surface, TokenSeq({"b"}));
}

TEST(Candidates, DuplicatesKeepEarliestOccurrence) {
  const auto c = extract_candidates(doc({"a", "b", "a"}), 1);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].start, 0u);
  EXPECT_EQ(c[1].start, 1u);
  const auto s = extract_candidates(doc({"region", "x", "regions"}), 1);
  EXPECT_EQ(s.size(), 2u);
}

TEST(Candidates, ZeroMaxLengthThrows) { EXPECT_THROW(extract_candidates(doc({"a"}), 0), InvalidArgument); }

TEST(Candidates, CountWithoutDuplicatesMatchesEnumerationProperty) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t m = 1 + rng.below(30), n = 1 + rng.below(6);
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < m; ++i) tokens.push_back("w" + std::to_string(i));
    const auto c = extract_candidates(doc(tokens), n);
    EXPECT_EQ(c.size(), ngram_count(m, n));
    std::set<std::string> keys;
    for (const auto& k : c) {
      EXPECT_LE(k.length, n);
      EXPECT_LE(k.start + k.length, m);
      keys.insert(stem_key(k.stemmed));
    }
    EXPECT_EQ(keys.size(), c.size());
  }
}

TEST(Labels, StemmedGoldMatches) {
  const auto c = label_candidates(extract_candidates(doc({"region"}), 1), {{"regions"}});
  EXPECT_EQ(c[0].label, Label::positive);
}

TEST(Labels, EmptyGoldIsAllNegative) {
  const auto c = label_candidates(extract_candidates(doc({"a", "b"}), 2), {});
  for (const auto& k : c) EXPECT_EQ(k.label, Label::negative);
}

TEST(Labels, ExactSequenceRequired) {
  const auto c = label_candidates(extract_candidates(doc({"a", "large", "region"}), 3), {{"large", "region"}});
  for (const auto& k : c) {
    const bool is_gold = k.surface == TokenSeq({"large", "region"});
    EXPECT_EQ(k.label, is_gold ? Label::positive : Label::negative) << stem_key(k.stemmed);
  }
}

}  // namespace
}  // namespace hypermatch
