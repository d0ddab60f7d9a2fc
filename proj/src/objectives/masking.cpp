#include <stdexcept>

#include "sstbert/objectives/objectives.hpp"

namespace sstbert::objectives {

MaskedSequence mask_tokens(const TokenSequence& seq, const Vocab& vocab, Rng& rng,
                           const MaskingConfig& config) {
  if (!(config.rate > 0.0 && config.rate < 1.0)) {
    throw std::invalid_argument("masking rate must be in (0, 1), got " + std::to_string(config.rate));
  }
  // Words as [begin, end) position ranges.
  std::vector<std::pair<std::size_t, std::size_t>> words;
  for (std::size_t i = 0; i < seq.max_len(); ++i) {
    const std::int32_t id = seq.ids[i];
    const bool maskable = seq.mask[i] == 1 && id != Vocab::kCls && id != Vocab::kSep && id != Vocab::kPad;
    if (!maskable) continue;
    const bool joins = !words.empty() && words.back().second == i && vocab.is_continuation(id);
    if (joins) {
      words.back().second = i + 1;
    } else {
      words.emplace_back(i, i + 1);
    }
  }
  if (words.empty()) throw NoMaskablePositions("sequence has no maskable position");

  std::vector<bool> chosen(words.size());
  bool any = false;
  for (std::size_t w = 0; w < words.size(); ++w) {
    chosen[w] = rng.bernoulli(config.rate);
    any = any || chosen[w];
  }
  if (!any) chosen[rng.below(words.size())] = true;

  MaskedSequence out{seq, std::vector<std::int32_t>(seq.max_len(), kNotPredicted), {}};
  const auto first_ordinary = static_cast<std::int32_t>(Vocab::kNumSpecials);
  const auto vocab_size = static_cast<std::int32_t>(vocab.size());
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (!chosen[w]) continue;
    for (std::size_t i = words[w].first; i < words[w].second; ++i) {
      out.targets[i] = seq.ids[i];
      out.positions.push_back(i);
      const double u = rng.uniform();
      if (u < config.mask_share) {
        out.seq.ids[i] = Vocab::kMask;
      } else if (u < config.mask_share + config.random_share) {
        out.seq.ids[i] = vocab_size > first_ordinary
                             ? first_ordinary + static_cast<std::int32_t>(rng.below(
                                                    static_cast<std::uint64_t>(vocab_size - first_ordinary)))
                             : Vocab::kMask;
      }
    }
  }
  return out;
}

}  // namespace sstbert::objectives
