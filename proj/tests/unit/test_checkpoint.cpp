#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hypermatch/checkpoint.hpp"
#include "hypermatch/error.hpp"
#include "hypermatch/training.hpp"

namespace hypermatch {
namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.layers = 2;
  c.hidden = 4;
  c.hyperbolic = 3;
  c.max_phrase_length = 2;
  return c;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("hypermatch_ckpt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST(ConfigHash, StableAndSensitive) {
  const auto a = hash_config(small_model());
  EXPECT_EQ(a, hash_config(small_model()));
  auto other = small_model();
  other.lambda = 0.4;
  EXPECT_NE(a, hash_config(other));
  EXPECT_EQ(to_hex(a).size(), 64u);
}

TEST(ConfigHash, IsSha256OfCanonicalJson) {
  // sha256 of the compact dump of the default configuration, from hashlib.
  const ModelConfig c;
  EXPECT_EQ(c.to_json().dump(),
            "{\"cnn_bias\":false,\"curvature\":1.0,\"euclidean\":false,\"hidden\":768,\"hyperbolic\":768,"
            "\"lambda\":0.5,\"layers\":12,\"margin\":1.0,\"max_phrase_length\":5,\"scorer_bias\":true,"
            "\"use_mixing\":true}");
  EXPECT_EQ(to_hex(hash_config(c)), "b4c1bec5166dbbd1d443f8cb75cc48573af9e15781315ab1db07a175fabe6d13");
}

TEST(Checkpoint, EncodeDecodeRoundTrip) {
  const auto c = small_model();
  const auto params = init_parameters(c, 4);
  CheckpointFile f = make_checkpoint(c, params, AdamState::zeros(params));
  f.step = 17;
  const auto back = decode_checkpoint(encode_checkpoint(f));
  EXPECT_EQ(back.config_hash, f.config_hash);
  EXPECT_EQ(back.step, 17u);
  ASSERT_EQ(back.records.size(), f.records.size());
  for (std::size_t i = 0; i < f.records.size(); ++i) {
    EXPECT_EQ(back.records[i].first, f.records[i].first);
    EXPECT_EQ(back.records[i].second, f.records[i].second);
  }
  const auto loaded = load_parameters(back, c);
  const auto a = params.tensors(), b = loaded.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].tensor, *b[i].tensor);
}

TEST(Checkpoint, LayoutHeader) {
  CheckpointFile f;
  f.step = 0x0102030405060708ull;
  f.records.emplace_back("x", Tensor::vector({1.5}));
  const auto bytes = encode_checkpoint(f);
  ASSERT_EQ(bytes.size(), 4u + 4 + 32 + 8 + 4 + 1 + 4 + 8 + 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HMCK");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[40], 0x08);
  EXPECT_EQ(bytes[47], 0x01);
}

TEST(Checkpoint, CorruptInputsAreRejected) {
  CheckpointFile f;
  f.records.emplace_back("x", Tensor::matrix(2, 2, {1, 2, 3, 4}));
  auto bytes = encode_checkpoint(f);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), CorruptData);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), CorruptData);
  for (std::size_t cut : {std::size_t{3}, std::size_t{30}, bytes.size() - 1, bytes.size() - 8}) {
    EXPECT_THROW(decode_checkpoint(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + cut)), CorruptData) << cut;
  }
}

TEST(Checkpoint, ConfigMismatchIsAStateError) {
  const auto c = small_model();
  const auto params = init_parameters(c, 4);
  const auto f = make_checkpoint(c, params, AdamState::zeros(params));
  auto other = c;
  other.margin = 2.0;
  EXPECT_THROW(load_parameters(f, other), StateError);
}

TEST(Checkpoint, MissingTensorIsCorrupt) {
  const auto c = small_model();
  const auto params = init_parameters(c, 4);
  auto f = make_checkpoint(c, params, AdamState::zeros(params));
  std::erase_if(f.records, [](const auto& r) { return r.first == "param/document.w_h"; });
  EXPECT_THROW(load_parameters(f, c), CorruptData);
}

TEST_F(TempDir, FileRoundTripAndErrors) {
  const auto c = small_model();
  const auto params = init_parameters(c, 4);
  const auto path = dir_ / "model.hmck";
  write_checkpoint(path, make_checkpoint(c, params, AdamState::zeros(params)));
  const auto back = read_checkpoint(path);
  EXPECT_EQ(back.config_hash, hash_config(c));
  EXPECT_THROW(read_checkpoint(dir_ / "missing.hmck"), IoError);
  {
    std::ofstream out(dir_ / "junk.hmck", std::ios::binary);
    out << "not a checkpoint at all";
  }
  EXPECT_THROW(read_checkpoint(dir_ / "junk.hmck"), CorruptData);
}

}  // namespace
}  // namespace hypermatch
