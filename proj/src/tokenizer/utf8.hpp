#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace sstbert::tokenizer::detail {

/// Byte offsets of every code point start plus the end offset. Invalid lead
/// bytes count as one-byte code points.
inline std::vector<std::size_t> code_point_offsets(std::string_view s) {
  std::vector<std::size_t> offsets;
  offsets.reserve(s.size() + 1);
  std::size_t i = 0;
  while (i < s.size()) {
    offsets.push_back(i);
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    i += len;
    if (i > s.size()) i = s.size();
  }
  offsets.push_back(s.size());
  return offsets;
}

}  // namespace sstbert::tokenizer::detail
