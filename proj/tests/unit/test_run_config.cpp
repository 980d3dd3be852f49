#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "hypermatch_cli/run_config.hpp"

namespace hypermatch::cli {
namespace {

TEST(RunConfig, AppliesFlatKeysToEachSection) {
  RunConfig c;
  c.apply_json({{"layers", 3},
                {"lambda", 0.25},
                {"learning_rate", 0.01},
                {"epochs", 4},
                {"documents", 12},
                {"corpus", "train.jsonl"},
                {"synthetic", true},
                {"embedding_seed", 9},
                {"k", {1, 2}},
                {"threads", 3}});
  EXPECT_EQ(c.model.layers, 3u);
  EXPECT_EQ(c.model.lambda, 0.25);
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.train.epochs, 4u);
  EXPECT_EQ(c.synth.documents, 12u);
  EXPECT_EQ(c.corpus, "train.jsonl");
  EXPECT_TRUE(c.synthetic);
  EXPECT_EQ(c.embedding_seed, 9u);
  EXPECT_EQ(c.ks, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(c.train.threads, 3u);
}

TEST(RunConfig, RejectsUnknownKeysAndBadTypes) {
  RunConfig c;
  EXPECT_THROW(c.apply_json({{"learnign_rate", 0.1}}), UsageError);
  EXPECT_THROW(c.apply_json({{"corpus", 3}}), UsageError);
  EXPECT_THROW(c.apply_json({{"lambda", 3.0}}), UsageError);
  EXPECT_THROW(c.apply_json(nlohmann::json::array()), UsageError);
}

TEST(RunConfig, RoundTripsThroughJson) {
  RunConfig c;
  c.apply_json({{"hidden", 16}, {"batch_size", 5}, {"checkpoint", "m.hmck"}});
  RunConfig d;
  d.apply_json(c.to_json());
  EXPECT_EQ(d.to_json(), c.to_json());
}

TEST(RunConfig, KnownKeysCoverTheSerializedForm) {
  const auto keys = known_keys();
  const nlohmann::json serialized = RunConfig{}.to_json();
  for (const auto& [k, v] : serialized.items()) {
    EXPECT_TRUE(std::find(keys.begin(), keys.end(), k) != keys.end()) << k;
  }
}

TEST(RunConfig, FromFileReportsMissingAndMalformedFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "hypermatch_run_config";
  std::filesystem::create_directories(dir);
  EXPECT_THROW(RunConfig::from_file(dir / "missing.json"), UsageError);
  {
    std::ofstream(dir / "bad.json") << "{not json";
  }
  EXPECT_THROW(RunConfig::from_file(dir / "bad.json"), UsageError);
  {
    std::ofstream(dir / "ok.json") << "{\"epochs\": 2}";
  }
  EXPECT_EQ(RunConfig::from_file(dir / "ok.json").train.epochs, 2u);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace hypermatch::cli
