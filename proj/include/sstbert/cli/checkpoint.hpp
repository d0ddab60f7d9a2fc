#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "sstbert/encoder/config.hpp"
#include "sstbert/numerics/tensor_io.hpp"

namespace sstbert::cli {

inline constexpr char kCheckpointMagic[4] = {'S', 'S', 'T', 'B'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatch : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Layout, little-endian: "SSTB", u32 version, seven u32 config fields
/// (layers, hidden, heads, intermediate, vocab, max_positions,
/// segment_types), f64 dropout_p as u64 bits, u32 provenance count then
/// key/value strings in key order, then the tensor table.
struct Checkpoint {
  encoder::ModelConfig config;
  std::map<std::string, std::string> provenance;
  numerics::TensorTable tensors;

  /// Throws CheckpointError when absent or unparsable.
  const std::string& get(const std::string& key) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws VersionMismatch on a different format version and CheckpointError
/// on anything else malformed, including an invalid config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the vocab tokens, hex; ties a checkpoint to its vocab file.
std::string vocab_fingerprint(const std::vector<std::string>& tokens);

}  // namespace sstbert::cli
