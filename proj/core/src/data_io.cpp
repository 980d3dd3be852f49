#include "hypermatch/data_io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hypermatch/error.hpp"
#include "hypermatch/rng.hpp"

namespace hypermatch {

namespace {

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

TokenSeq string_array(const nlohmann::json& j, const std::string& field, const std::string& at) {
  if (!j.is_array()) throw CorruptData(at + ": field '" + field + "' must be an array of strings");
  TokenSeq out;
  for (const auto& e : j) {
    if (!e.is_string()) throw CorruptData(at + ": field '" + field + "' must contain only strings");
    out.push_back(e.get<std::string>());
    if (out.back().empty()) throw CorruptData(at + ": field '" + field + "' contains an empty string");
  }
  return out;
}

}  // namespace

std::vector<CorpusRecord> parse_corpus(std::istream& in, std::string_view source) {
  std::vector<CorpusRecord> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string at = where(source, number);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorruptData(at + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw CorruptData(at + ": expected a JSON object");
    for (const char* field : {"id", "tokens", "keyphrases"}) {
      if (!j.contains(field)) throw CorruptData(at + ": missing field '" + field + "'");
    }
    if (j.size() != 3) throw CorruptData(at + ": unexpected fields (allowed: id, tokens, keyphrases)");
    if (!j["id"].is_string()) throw CorruptData(at + ": field 'id' must be a string");
    CorpusRecord r;
    r.id = j["id"].get<std::string>();
    r.tokens = string_array(j["tokens"], "tokens", at);
    if (r.tokens.empty()) throw CorruptData(at + ": document '" + r.id + "' has no tokens");
    if (!j["keyphrases"].is_array()) throw CorruptData(at + ": field 'keyphrases' must be an array of arrays");
    for (const auto& k : j["keyphrases"]) {
      r.gold.push_back(string_array(k, "keyphrases", at));
      if (r.gold.back().empty()) throw CorruptData(at + ": empty keyphrase");
    }
    if (auto [it, fresh] = seen.emplace(r.id, number); !fresh) {
      throw CorruptData(at + ": duplicate id '" + r.id + "' (first seen at " + where(source, it->second) + ")");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  return parse_corpus(in, path.string());
}

std::string corpus_line(const CorpusRecord& record) {
  return nlohmann::json{{"id", record.id}, {"tokens", record.tokens}, {"keyphrases", record.gold}}.dump();
}

void write_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << corpus_line(r) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void read_exact(int fd, void* buf, std::size_t n, std::uint64_t offset, const std::filesystem::path& path) {
  auto* p = static_cast<std::uint8_t*>(buf);
  while (n > 0) {
    const ssize_t got = ::pread(fd, p, n, static_cast<off_t>(offset));
    if (got < 0) {
      if (errno == EINTR) continue;
      throw IoError("read failed for " + path.string() + ": " + std::strerror(errno));
    }
    if (got == 0) throw CorruptData(path.string() + ": unexpected end of file at byte " + std::to_string(offset));
    p += got;
    n -= static_cast<std::size_t>(got);
    offset += static_cast<std::uint64_t>(got);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_embeddings(std::uint32_t layers, std::uint32_t hidden,
                                            const std::vector<std::pair<std::string, Tensor>>& docs) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'H', 'M', 'E', 'B'});
  put_u32(out, kEmbeddingVersion);
  put_u32(out, layers);
  put_u32(out, hidden);
  put_u64(out, docs.size());
  std::uint64_t offset = kEmbeddingHeaderBytes + kEmbeddingIndexEntryBytes * docs.size();
  std::unordered_set<std::uint64_t> hashes;
  for (const auto& [id, t] : docs) {
    if (t.rank() != 3 || t.shape()[1] != layers || t.shape()[2] != hidden) {
      throw InvalidArgument("encode_embeddings: document '" + id + "' has shape " + shape_string(t.shape()));
    }
    const std::uint64_t h = fnv1a64(id);
    if (!hashes.insert(h).second) throw InvalidArgument("encode_embeddings: duplicate id hash for '" + id + "'");
    put_u64(out, h);
    put_u32(out, static_cast<std::uint32_t>(t.shape()[0]));
    put_u64(out, offset);
    offset += 4 * t.size();
  }
  for (const auto& entry : docs) {
    for (double v : entry.second.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, std::uint32_t layers, std::uint32_t hidden,
                      const std::vector<std::pair<std::string, Tensor>>& docs) {
  const auto bytes = encode_embeddings(layers, hidden, docs);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

EmbeddingReader::EmbeddingReader(const std::filesystem::path& path) : path_(path) {
  fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd_ < 0) throw IoError("cannot open embeddings " + path.string() + ": " + std::strerror(errno));
  try {
    std::error_code ec;
    const std::uint64_t file_size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
    if (file_size < kEmbeddingHeaderBytes) throw CorruptData(path.string() + ": file shorter than the HMEB header");
    std::uint8_t header[kEmbeddingHeaderBytes];
    read_exact(fd_, header, sizeof header, 0, path_);
    if (std::memcmp(header, "HMEB", 4) != 0) throw CorruptData(path.string() + ": bad magic (not an HMEB file)");
    const std::uint32_t version = get_u32(header + 4);
    if (version != kEmbeddingVersion) {
      throw CorruptData(path.string() + ": unsupported HMEB version " + std::to_string(version));
    }
    layers_ = get_u32(header + 8);
    hidden_ = get_u32(header + 12);
    const std::uint64_t count = get_u64(header + 16);
    if (layers_ == 0 || hidden_ == 0) throw CorruptData(path.string() + ": zero layer count or hidden size");
    if (count > (file_size - kEmbeddingHeaderBytes) / kEmbeddingIndexEntryBytes) {
      throw CorruptData(path.string() + ": index of " + std::to_string(count) + " entries overruns the file");
    }
    std::vector<std::uint8_t> raw(count * kEmbeddingIndexEntryBytes);
    if (!raw.empty()) read_exact(fd_, raw.data(), raw.size(), kEmbeddingHeaderBytes, path_);
    std::uint64_t expected = kEmbeddingHeaderBytes + raw.size();
    const std::uint64_t block = 4ULL * layers_ * hidden_;
    index_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint8_t* p = raw.data() + i * kEmbeddingIndexEntryBytes;
      EmbeddingIndexEntry e{get_u64(p), get_u32(p + 8), get_u64(p + 12)};
      if (e.offset != expected) {
        throw CorruptData(path.string() + ": index entry " + std::to_string(i) + " has offset " +
                          std::to_string(e.offset) + ", expected " + std::to_string(expected));
      }
      expected += block * e.tokens;
      if (!by_hash_.emplace(e.id_hash, index_.size()).second) {
        throw CorruptData(path.string() + ": duplicate document hash in index entry " + std::to_string(i));
      }
      index_.push_back(e);
    }
    if (expected != file_size) {
      throw CorruptData(path.string() + ": payload is " + std::to_string(file_size) + " bytes, index implies " +
                        std::to_string(expected));
    }
  } catch (...) {
    ::close(fd_);
    throw;
  }
}

EmbeddingReader::~EmbeddingReader() {
  if (fd_ >= 0) ::close(fd_);
}

bool EmbeddingReader::contains(std::string_view id) const { return by_hash_.contains(fnv1a64(id)); }

std::size_t EmbeddingReader::token_count(std::string_view id) const {
  const auto it = by_hash_.find(fnv1a64(id));
  if (it == by_hash_.end()) throw NotFound("no embeddings for document '" + std::string(id) + "' in " + path_.string());
  return index_[it->second].tokens;
}

LayeredTokenEmbeddings EmbeddingReader::load(std::string_view id) const {
  const auto it = by_hash_.find(fnv1a64(id));
  if (it == by_hash_.end()) throw NotFound("no embeddings for document '" + std::string(id) + "' in " + path_.string());
  const EmbeddingIndexEntry& e = index_[it->second];
  std::size_t tokens = e.tokens;
  if (tokens > kMaxSequenceLength) {
    spdlog::warn("document '{}' has {} tokens; truncating to {}", id, tokens, kMaxSequenceLength);
    tokens = kMaxSequenceLength;
  }
  if (tokens == 0) throw CorruptData(path_.string() + ": document '" + std::string(id) + "' has no tokens");
  const std::size_t count = tokens * layers_ * hidden_;
  std::vector<std::uint8_t> raw(count * 4);
  read_exact(fd_, raw.data(), raw.size(), e.offset, path_);
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(get_u32(raw.data() + 4 * i));
  for (double v : values) {
    if (!std::isfinite(v)) throw CorruptData(path_.string() + ": non-finite value in '" + std::string(id) + "'");
  }
  return LayeredTokenEmbeddings(Tensor({tokens, layers_, hidden_}, std::move(values)));
}

LayeredTokenEmbeddings load_embeddings(const std::filesystem::path& path, std::string_view id) {
  return EmbeddingReader(path).load(id);
}

}  // namespace hypermatch
