#include "sstbert/objectives/objectives.hpp"

namespace sstbert::objectives {

std::vector<NspPair> make_nsp_pairs(std::span<const std::vector<std::int32_t>> sentences,
                                    std::size_t max_len, Rng& rng, double is_next_prob) {
  const std::size_t n = sentences.size();
  if (n < 2) throw CorpusTooSmall("next sentence pairs need at least two sentences");
  constexpr int kMaxAttempts = 64;
  std::vector<NspPair> pairs;
  pairs.reserve(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (rng.bernoulli(is_next_prob)) {
      pairs.push_back({tokenizer::frame_pair(sentences[i], sentences[i + 1], max_len), true});
      continue;
    }
    std::size_t pick = i + 1;
    std::size_t fallback = i + 1;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const std::size_t r = rng.below(n - 1);
      const std::size_t candidate = r >= i + 1 ? r + 1 : r;  // never i+1
      fallback = candidate;
      if (sentences[candidate] != sentences[i + 1]) {
        pick = candidate;
        break;
      }
    }
    if (pick == i + 1) pick = fallback;
    pairs.push_back({tokenizer::frame_pair(sentences[i], sentences[pick], max_len), false});
  }
  return pairs;
}

std::vector<NspPair> make_nsp_pairs(std::span<const std::string> sentences, const Vocab& vocab,
                                    std::size_t max_len, Rng& rng, double is_next_prob) {
  std::vector<std::vector<std::int32_t>> pieces;
  pieces.reserve(sentences.size());
  for (const auto& s : sentences) pieces.push_back(tokenizer::text_piece_ids(s, vocab));
  return make_nsp_pairs(pieces, max_len, rng, is_next_prob);
}

std::vector<PretrainExample> make_examples(std::span<const std::vector<std::int32_t>> sentences,
                                           const Vocab& vocab, std::size_t max_len, Rng& rng,
                                           const MaskingConfig& masking) {
  Rng pair_rng = rng.fork(1);
  Rng mask_rng = rng.fork(2);
  std::vector<PretrainExample> out;
  for (auto& pair : make_nsp_pairs(sentences, max_len, pair_rng)) {
    try {
      out.push_back({mask_tokens(pair.seq, vocab, mask_rng, masking), pair.is_next});
    } catch (const NoMaskablePositions&) {
      // Both sides empty after truncation: nothing to predict.
    }
  }
  return out;
}

}  // namespace sstbert::objectives
