#include "hypermatch/checkpoint.hpp"

#include <openssl/sha.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hypermatch/error.hpp"

namespace hypermatch {

namespace {

constexpr char kMagic[4] = {'H', 'M', 'C', 'K'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  bool done() const { return pos_ == in_.size(); }
  void bytes(void* p, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw CorruptData(std::string("checkpoint truncated while reading ") + what + " at byte " + std::to_string(pos_));
    }
  }

  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

ConfigHash hash_config(const ModelConfig& config) {
  const std::string canonical = config.to_json().dump();
  ConfigHash h{};
  SHA256(reinterpret_cast<const unsigned char*>(canonical.data()), canonical.size(), h.data());
  return h;
}

std::string to_hex(const ConfigHash& hash) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : hash) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

const Tensor* CheckpointFile::find(const std::string& name) const {
  for (const auto& [n, t] : records) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const CheckpointFile& file) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.bytes(file.config_hash.data(), file.config_hash.size());
  w.u64(file.step);
  for (const auto& [name, t] : file.records) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u64(e);
    for (double v : t.values()) w.f64(v);
  }
  return w.take();
}

CheckpointFile decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw CorruptData("not a checkpoint file (bad magic)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CorruptData("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointFile file;
  r.bytes(file.config_hash.data(), file.config_hash.size(), "config hash");
  file.step = r.u64("step");
  while (!r.done()) {
    const std::uint32_t len = r.u32("record name length");
    if (len > r.remaining()) throw CorruptData("checkpoint record name overruns the file");
    std::string name(len, '\0');
    r.bytes(name.data(), len, "record name");
    const std::uint32_t rank = r.u32("record rank");
    if (rank > 8) throw CorruptData("checkpoint record '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& e : shape) {
      e = r.u64("record extent");
      if (e != 0 && count > r.remaining() / e) throw CorruptData("checkpoint record '" + name + "' overruns the file");
      count *= e;
    }
    if (count > r.remaining() / 8) throw CorruptData("checkpoint record '" + name + "' overruns the file");
    std::vector<double> values(count);
    for (double& v : values) v = r.f64("record values");
    file.records.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return file;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file) {
  const auto bytes = encode_checkpoint(file);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CorruptData& e) {
    throw CorruptData(path.string() + ": " + e.what());
  }
}

Parameters load_parameters(const CheckpointFile& file, const ModelConfig& config) {
  if (file.config_hash != hash_config(config)) {
    throw StateError("checkpoint was written for a different model configuration (hash " + to_hex(file.config_hash) +
                     ", expected " + to_hex(hash_config(config)) + ")");
  }
  Parameters p(config);
  for (auto& t : p.tensors()) {
    const Tensor* stored = file.find("param/" + t.name);
    if (stored == nullptr) throw CorruptData("checkpoint lacks tensor param/" + t.name);
    if (stored->shape() != t.tensor->shape()) {
      throw CorruptData("checkpoint tensor param/" + t.name + " has shape " + shape_string(stored->shape()) +
                        ", expected " + shape_string(t.tensor->shape()));
    }
    *t.tensor = *stored;
  }
  return p;
}

}  // namespace hypermatch
