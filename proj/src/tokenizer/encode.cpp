#include <stdexcept>

#include "sstbert/tokenizer/tokenizer.hpp"

namespace sstbert::tokenizer {

namespace {

void pad_to(TokenSequence& seq, std::size_t max_len) {
  seq.n_real = seq.ids.size();
  seq.mask.assign(seq.n_real, 1);
  seq.ids.resize(max_len, Vocab::kPad);
  seq.segment_ids.resize(max_len, 0);
  seq.mask.resize(max_len, 0);
}

}  // namespace

TokenSequence frame_single(std::vector<std::int32_t> pieces, std::size_t max_len) {
  if (max_len < 3) throw std::invalid_argument("max_len must be at least 3");
  if (pieces.size() > max_len - 2) pieces.resize(max_len - 2);
  TokenSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(Vocab::kCls);
  seq.ids.insert(seq.ids.end(), pieces.begin(), pieces.end());
  seq.ids.push_back(Vocab::kSep);
  seq.segment_ids.assign(seq.ids.size(), 0);
  pad_to(seq, max_len);
  return seq;
}

TokenSequence frame_pair(std::vector<std::int32_t> a, std::vector<std::int32_t> b,
                         std::size_t max_len) {
  if (max_len < 5) throw std::invalid_argument("max_len must be at least 5");
  while (a.size() + b.size() > max_len - 3) {
    if (a.size() > b.size()) {
      a.pop_back();
    } else {
      b.pop_back();
    }
  }
  TokenSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(Vocab::kCls);
  seq.ids.insert(seq.ids.end(), a.begin(), a.end());
  seq.ids.push_back(Vocab::kSep);
  seq.segment_ids.assign(seq.ids.size(), 0);
  seq.ids.insert(seq.ids.end(), b.begin(), b.end());
  seq.ids.push_back(Vocab::kSep);
  seq.segment_ids.resize(seq.ids.size(), 1);
  pad_to(seq, max_len);
  return seq;
}

TokenSequence encode(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  return frame_single(text_piece_ids(text, vocab), max_len);
}

TokenSequence encode_pair(std::string_view a, std::string_view b, const Vocab& vocab,
                          std::size_t max_len) {
  return frame_pair(text_piece_ids(a, vocab), text_piece_ids(b, vocab), max_len);
}

std::string check_sequence(const TokenSequence& seq, bool pair) {
  const std::size_t len = seq.ids.size();
  if (len == 0) return "empty sequence";
  if (seq.segment_ids.size() != len || seq.mask.size() != len) return "field lengths differ";
  if (seq.ids[0] != Vocab::kCls) return "first token is not [CLS]";
  std::size_t real = 0;
  for (std::size_t i = 0; i < len; ++i) {
    if (seq.mask[i] != 0 && seq.mask[i] != 1) return "mask value outside {0,1}";
    if ((seq.mask[i] == 0) != (seq.ids[i] == Vocab::kPad)) {
      return "mask disagrees with [PAD] at position " + std::to_string(i);
    }
    if (seq.mask[i] == 1) {
      if (i != real) return "real token after padding at position " + std::to_string(i);
      ++real;
    }
  }
  if (real != seq.n_real) return "n_real does not count the real tokens";
  if (seq.ids[real - 1] != Vocab::kSep) return "final real token is not [SEP]";

  std::size_t seps = 0;
  std::size_t first_sep = 0;
  for (std::size_t i = 0; i < real; ++i) {
    if (seq.ids[i] == Vocab::kSep) {
      if (seps == 0) first_sep = i;
      ++seps;
    }
    if (seq.ids[i] == Vocab::kCls && i != 0) return "[CLS] after position 0";
  }
  if (seps != (pair ? 2u : 1u)) return "wrong number of [SEP] tokens";
  for (std::size_t i = 0; i < len; ++i) {
    const std::int32_t expected = (pair && seq.mask[i] == 1 && i > first_sep) ? 1 : 0;
    if (seq.segment_ids[i] != expected) return "segment id wrong at position " + std::to_string(i);
  }
  return {};
}

}  // namespace sstbert::tokenizer
