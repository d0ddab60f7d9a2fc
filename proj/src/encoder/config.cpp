#include "sstbert/encoder/config.hpp"

#include <sstream>

namespace sstbert::encoder {

void ModelConfig::validate() const {
  if (layers == 0 || hidden == 0 || heads == 0 || intermediate == 0 || vocab == 0 ||
      max_positions == 0) {
    throw ConfigError("model sizes must be positive: " + describe(*this));
  }
  if (hidden % heads != 0) {
    throw ConfigError("hidden " + std::to_string(hidden) + " is not divisible by heads " +
                      std::to_string(heads));
  }
  if (segment_types != 2) throw ConfigError("segment_types must be 2");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ConfigError("dropout_p must be in [0, 1), got " + std::to_string(dropout_p));
  }
}

ModelConfig preset(std::string_view name) {
  if (name == "base") return {12, 768, 12, 3072, 30522, 512, 2, 0.1};
  if (name == "large") return {24, 1024, 16, 4096, 30522, 512, 2, 0.1};
  if (name == "toy") return {2, 64, 2, 256, 2000, 64, 2, 0.1};
  throw UnknownPreset("unknown preset '" + std::string(name) + "' (expected base, large or toy)");
}

std::size_t param_count(const ModelConfig& c) {
  const std::size_t h = c.hidden, f = c.intermediate;
  const std::size_t embeddings = (c.vocab + c.max_positions + c.segment_types) * h + 2 * h;
  const std::size_t attention = 4 * (h * h + h);
  const std::size_t ffn = h * f + f + f * h + h;
  const std::size_t norms = 4 * h;
  const std::size_t pooler = h * h + h;
  return embeddings + c.layers * (attention + ffn + norms) + pooler;
}

std::string describe(const ModelConfig& c) {
  std::ostringstream out;
  out << "L=" << c.layers << " H=" << c.hidden << " A=" << c.heads << " F=" << c.intermediate
      << " V=" << c.vocab << " P=" << c.max_positions << " dropout=" << c.dropout_p;
  return out.str();
}

}  // namespace sstbert::encoder
