#pragma once

// Corpus JSON-lines files and HMEB per-layer embedding files.
//
// HMEB layout, little-endian:
//
//   "HMEB"  u32 version  u32 L  u32 d_r  u64 document count
//   index:   per document  u64 FNV-1a id hash, u32 token count, u64 byte offset
//   payload: per document  f32[tokens][L][d_r]
//
// Offsets are absolute and strictly increasing.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hypermatch/candidates.hpp"
#include "hypermatch/encoders.hpp"

namespace hypermatch {

using CorpusRecord = Document;

/// One JSON object per line with exactly the fields id, tokens, keyphrases.
/// Blank lines are skipped. Throws CorruptData naming the line on malformed
/// input and on duplicate ids.
std::vector<CorpusRecord> parse_corpus(std::istream& in, std::string_view source = "<stream>");
std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records);
std::string corpus_line(const CorpusRecord& record);

inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 24;
inline constexpr std::size_t kEmbeddingIndexEntryBytes = 20;

struct EmbeddingIndexEntry {
  std::uint64_t id_hash = 0;
  std::uint32_t tokens = 0;
  std::uint64_t offset = 0;
};

/// Serializes documents (in the given order) into HMEB bytes. Every tensor
/// must be [M, L, d_r] with the given L and d_r.
std::vector<std::uint8_t> encode_embeddings(std::uint32_t layers, std::uint32_t hidden,
                                            const std::vector<std::pair<std::string, Tensor>>& docs);
void write_embeddings(const std::filesystem::path& path, std::uint32_t layers, std::uint32_t hidden,
                      const std::vector<std::pair<std::string, Tensor>>& docs);

/// Random-access reader. Concurrent load() calls are safe.
class EmbeddingReader {
 public:
  /// Validates the header and index against the file size.
  explicit EmbeddingReader(const std::filesystem::path& path);
  ~EmbeddingReader();
  EmbeddingReader(const EmbeddingReader&) = delete;
  EmbeddingReader& operator=(const EmbeddingReader&) = delete;

  std::uint32_t layers() const noexcept { return layers_; }
  std::uint32_t hidden() const noexcept { return hidden_; }
  std::size_t size() const noexcept { return index_.size(); }
  const std::vector<EmbeddingIndexEntry>& index() const noexcept { return index_; }
  bool contains(std::string_view id) const;
  /// Stored token count of `id` (before truncation). Throws NotFound.
  std::size_t token_count(std::string_view id) const;

  /// Throws NotFound for an unknown id. Documents longer than 512 tokens are
  /// truncated with a warning.
  LayeredTokenEmbeddings load(std::string_view id) const;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  std::uint32_t layers_ = 0;
  std::uint32_t hidden_ = 0;
  std::vector<EmbeddingIndexEntry> index_;
  std::unordered_map<std::uint64_t, std::size_t> by_hash_;
};

LayeredTokenEmbeddings load_embeddings(const std::filesystem::path& path, std::string_view id);

}  // namespace hypermatch
