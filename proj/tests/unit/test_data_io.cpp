#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hypermatch/data_io.hpp"
#include "hypermatch/error.hpp"
#include "hypermatch/rng.hpp"

namespace hypermatch {
namespace {

class DataDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("hypermatch_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

std::string corrupt_message(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_corpus(in, "c.jsonl");
  } catch (const CorruptData& e) {
    return e.what();
  }
  return "";
}

TEST(Corpus, ParsesRecordsAndSkipsBlankLines) {
  std::istringstream in(
      "{\"id\":\"a\",\"tokens\":[\"x\",\"y\"],\"keyphrases\":[[\"x\"]]}\n\n"
      "{\"id\":\"b\",\"tokens\":[\"z\"],\"keyphrases\":[]}\n");
  const auto r = parse_corpus(in);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].tokens, TokenSeq({"x", "y"}));
  EXPECT_EQ(r[0].gold, std::vector<TokenSeq>({{"x"}}));
  EXPECT_TRUE(r[1].gold.empty());
}

TEST(Corpus, ErrorsNameTheLine) {
  const std::string good = "{\"id\":\"a\",\"tokens\":[\"x\"],\"keyphrases\":[]}\n";
  EXPECT_NE(corrupt_message(good + "{not json\n").find("c.jsonl:2"), std::string::npos);
  EXPECT_NE(corrupt_message(good + "\n{\"id\":\"b\",\"tokens\":[\"x\"]}\n").find("c.jsonl:3"), std::string::npos);
  EXPECT_NE(corrupt_message(good + good).find("duplicate id"), std::string::npos);
  EXPECT_NE(corrupt_message("{\"id\":\"a\",\"tokens\":[],\"keyphrases\":[]}").find("no tokens"), std::string::npos);
  EXPECT_NE(corrupt_message("{\"id\":\"a\",\"tokens\":[\"x\"],\"keyphrases\":[],\"extra\":1}").find("c.jsonl:1"),
            std::string::npos);
  EXPECT_NE(corrupt_message("{\"id\":\"a\",\"tokens\":[1],\"keyphrases\":[]}").find("only strings"), std::string::npos);
}

TEST_F(DataDir, CorpusFileRoundTrip) {
  const std::vector<CorpusRecord> docs = {{"a", {"x", "y"}, {{"x", "y"}}}, {"b", {"q"}, {}}};
  write_corpus(dir_ / "c.jsonl", docs);
  const auto back = load_corpus(dir_ / "c.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].id, "a");
  EXPECT_EQ(back[0].gold, docs[0].gold);
  EXPECT_EQ(corpus_line(docs[1]), "{\"id\":\"b\",\"keyphrases\":[],\"tokens\":[\"q\"]}");
  EXPECT_THROW(load_corpus(dir_ / "missing.jsonl"), IoError);
}

Tensor random_block(Rng& rng, std::size_t m, std::size_t l, std::size_t d) {
  Tensor t({m, l, d});
  for (double& v : t.values()) v = rng.gaussian(0.0, 1.0);
  return t;
}

TEST_F(DataDir, EmbeddingRoundTripWithinFloatPrecision) {
  Rng rng(1);
  const std::vector<std::pair<std::string, Tensor>> docs = {{"a", random_block(rng, 3, 2, 4)},
                                                            {"b", random_block(rng, 1, 2, 4)}};
  write_embeddings(dir_ / "e.hmeb", 2, 4, docs);
  EXPECT_EQ(std::filesystem::file_size(dir_ / "e.hmeb"),
            kEmbeddingHeaderBytes + 2 * kEmbeddingIndexEntryBytes + 4 * 8 * 4);
  EmbeddingReader r(dir_ / "e.hmeb");
  EXPECT_EQ(r.layers(), 2u);
  EXPECT_EQ(r.hidden(), 4u);
  EXPECT_EQ(r.size(), 2u);
  EXPECT_TRUE(r.contains("b"));
  EXPECT_FALSE(r.contains("c"));
  EXPECT_EQ(r.token_count("a"), 3u);
  for (const auto& [id, t] : docs) {
    const auto e = r.load(id);
    ASSERT_EQ(e.tensor().shape(), t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(e.tensor()[i], static_cast<double>(static_cast<float>(t[i])));
  }
  EXPECT_THROW(r.load("c"), NotFound);
  EXPECT_THROW(r.token_count("c"), NotFound);
}

TEST_F(DataDir, EmbeddingLayoutHeader) {
  const auto bytes = encode_embeddings(3, 5, {{"a", Tensor({1, 3, 5})}});
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HMEB");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 3);
  EXPECT_EQ(bytes[12], 5);
  EXPECT_EQ(bytes[16], 1);
  std::uint64_t hash = 0;
  std::memcpy(&hash, bytes.data() + 24, 8);
  EXPECT_EQ(hash, fnv1a64("a"));
  std::uint64_t offset = 0;
  std::memcpy(&offset, bytes.data() + 36, 8);
  EXPECT_EQ(offset, kEmbeddingHeaderBytes + kEmbeddingIndexEntryBytes);
  EXPECT_THROW(encode_embeddings(3, 5, {{"a", Tensor({1, 2, 5})}}), InvalidArgument);
}

TEST_F(DataDir, LongDocumentsAreTruncatedTo512) {
  Tensor big({600, 1, 2});
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<double>(i % 7);
  write_embeddings(dir_ / "e.hmeb", 1, 2, {{"long", big}});
  EmbeddingReader r(dir_ / "e.hmeb");
  EXPECT_EQ(r.token_count("long"), 600u);
  EXPECT_EQ(r.load("long").tokens(), 512u);
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TEST_F(DataDir, CorruptEmbeddingFilesAreRejected) {
  const auto bytes = encode_embeddings(1, 2, {{"a", Tensor({2, 1, 2})}});
  auto bad = bytes;
  bad[0] = 'X';
  write_bytes(dir_ / "magic.hmeb", bad);
  EXPECT_THROW(EmbeddingReader(dir_ / "magic.hmeb"), CorruptData);
  bad = bytes;
  bad[4] = 7;
  write_bytes(dir_ / "version.hmeb", bad);
  EXPECT_THROW(EmbeddingReader(dir_ / "version.hmeb"), CorruptData);
  write_bytes(dir_ / "short.hmeb", std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 4));
  EXPECT_THROW(EmbeddingReader(dir_ / "short.hmeb"), CorruptData);
  write_bytes(dir_ / "header.hmeb", std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10));
  EXPECT_THROW(EmbeddingReader(dir_ / "header.hmeb"), CorruptData);
  EXPECT_THROW(EmbeddingReader(dir_ / "missing.hmeb"), IoError);
}

}  // namespace
}  // namespace hypermatch
