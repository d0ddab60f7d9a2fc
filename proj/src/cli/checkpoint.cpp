#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sstbert/cli/checkpoint.hpp"

namespace sstbert::cli {

namespace nx = numerics;

const std::string& Checkpoint::get(const std::string& key) const {
  const auto it = provenance.find(key);
  if (it == provenance.end()) throw CheckpointError("checkpoint lacks provenance field '" + key + "'");
  return it->second;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  // Serialize fully before touching the file so a failure leaves no stub.
  std::ostringstream buf(std::ios::binary);
  buf.write(kCheckpointMagic, 4);
  nx::write_u32(buf, kCheckpointVersion);
  const auto& c = checkpoint.config;
  for (std::size_t v : {c.layers, c.hidden, c.heads, c.intermediate, c.vocab, c.max_positions, c.segment_types}) {
    nx::write_u32(buf, static_cast<std::uint32_t>(v));
  }
  nx::write_u64(buf, std::bit_cast<std::uint64_t>(c.dropout_p));
  nx::write_u32(buf, static_cast<std::uint32_t>(checkpoint.provenance.size()));
  for (const auto& [key, value] : checkpoint.provenance) {
    nx::write_string(buf, key);
    nx::write_string(buf, value);
  }
  nx::write_tensor_table(buf, checkpoint.tensors);

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    const std::string bytes = buf.str();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  try {
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || !std::equal(magic, magic + 4, kCheckpointMagic)) {
      throw CheckpointError(path.string() + " is not a checkpoint (bad magic)");
    }
    const std::uint32_t version = nx::read_u32(in);
    if (version != kCheckpointVersion) {
      throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                            std::to_string(kCheckpointVersion));
    }
    Checkpoint cp;
    auto& c = cp.config;
    for (std::size_t* field : {&c.layers, &c.hidden, &c.heads, &c.intermediate, &c.vocab, &c.max_positions,
                               &c.segment_types}) {
      *field = nx::read_u32(in);
    }
    c.dropout_p = std::bit_cast<double>(nx::read_u64(in));
    c.validate();
    const std::uint32_t fields = nx::read_u32(in);
    for (std::uint32_t i = 0; i < fields; ++i) {
      std::string key = nx::read_string(in);
      cp.provenance[key] = nx::read_string(in);
    }
    cp.tensors = nx::read_tensor_table(in);
    if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes in " + path.string());
    return cp;
  } catch (const nx::FormatError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const encoder::ConfigError& e) {
    throw CheckpointError(path.string() + ": invalid model config: " + e.what());
  }
}

std::string vocab_fingerprint(const std::vector<std::string>& tokens) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& t : tokens) {
    for (unsigned char ch : t) h = (h ^ ch) * 0x100000001b3ull;
    h = (h ^ '\n') * 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sstbert::cli
