#pragma once

// HMCK checkpoint files. Little-endian throughout:
//
//   "HMCK"  u32 version  u8[32] config hash  u64 step
//   repeated: u32 name length, name bytes, u32 rank, u64 extents[rank], f64 values
//
// Records run to the end of the file.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hypermatch/model.hpp"
#include "hypermatch/tensor.hpp"

namespace hypermatch {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using ConfigHash = std::array<std::uint8_t, 32>;

/// SHA-256 of the compact canonical JSON of `config`.
ConfigHash hash_config(const ModelConfig& config);
std::string to_hex(const ConfigHash& hash);

struct CheckpointFile {
  ConfigHash config_hash{};
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, Tensor>> records;

  const Tensor* find(const std::string& name) const;
};

/// Writes to a sibling temporary file and renames it into place.
void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file);

/// Throws IoError when the file cannot be opened and CorruptData on a bad
/// magic, an unknown version or a truncated record.
CheckpointFile read_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const CheckpointFile& file);
CheckpointFile decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Copies the "param/<name>" records into a Parameters shaped for `config`.
/// Throws StateError if the stored hash differs from hash_config(config) and
/// CorruptData if a tensor is missing or misshapen.
Parameters load_parameters(const CheckpointFile& file, const ModelConfig& config);

}  // namespace hypermatch
