#include "sstbert/tokenizer/tokenizer.hpp"
#include "utf8.hpp"

namespace sstbert::tokenizer {

std::vector<std::int32_t> wordpiece_ids(std::string_view word, const Vocab& vocab) {
  const auto offsets = detail::code_point_offsets(word);
  const std::size_t n = offsets.size() - 1;
  if (n == 0) return {};
  if (n > kMaxWordChars) return {Vocab::kUnk};

  std::vector<std::int32_t> pieces;
  std::string candidate;
  std::size_t start = 0;
  while (start < n) {
    std::optional<std::int32_t> match;
    std::size_t end = n;
    for (; end > start; --end) {
      candidate.clear();
      if (start > 0) candidate.append(Vocab::kContinuation);
      candidate.append(word.substr(offsets[start], offsets[end] - offsets[start]));
      match = vocab.find(candidate);
      if (match && !vocab.is_special(*match)) break;
      match.reset();
    }
    if (!match) return {Vocab::kUnk};
    pieces.push_back(*match);
    start = end;
  }
  return pieces;
}

std::vector<std::string> wordpiece(std::string_view word, const Vocab& vocab) {
  std::vector<std::string> out;
  for (std::int32_t id : wordpiece_ids(word, vocab)) out.push_back(vocab.token(id));
  return out;
}

std::vector<std::int32_t> text_piece_ids(std::string_view text, const Vocab& vocab) {
  std::vector<std::int32_t> ids;
  for (const auto& w : canonical_words(text)) {
    const auto pieces = wordpiece_ids(w, vocab);
    ids.insert(ids.end(), pieces.begin(), pieces.end());
  }
  return ids;
}

}  // namespace sstbert::tokenizer
