#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sstbert::encoder {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownPreset : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 2;
  std::size_t intermediate = 256;
  std::size_t vocab = 2000;
  std::size_t max_positions = 64;
  std::size_t segment_types = 2;
  double dropout_p = 0.1;

  /// Throws ConfigError on a zero size, hidden % heads != 0,
  /// segment_types != 2 or dropout_p outside [0, 1).
  void validate() const;
  std::size_t head_dim() const { return hidden / heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// "base", "large" (vocab 30522, 512 positions) or "toy" (vocab 2000,
/// 64 positions).
ModelConfig preset(std::string_view name);

/// Trainable scalars in the encoder, closed form.
std::size_t param_count(const ModelConfig& config);

std::string describe(const ModelConfig& config);

}  // namespace sstbert::encoder
