#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sstbert::tokenizer {

class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TargetTooSmall : public VocabError {
 public:
  using VocabError::VocabError;
};

/// Token strings indexed by id. The five specials always occupy ids 0-4;
/// continuation pieces carry a literal "##" prefix.
class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kCls = 2;
  static constexpr std::int32_t kSep = 3;
  static constexpr std::int32_t kMask = 4;
  static constexpr std::size_t kNumSpecials = 5;
  static constexpr std::array<std::string_view, kNumSpecials> kSpecials = {
      "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  static constexpr std::string_view kContinuation = "##";

  /// Vocab of the specials only.
  Vocab();
  /// Throws VocabError unless the specials lead in order and no token repeats.
  explicit Vocab(std::vector<std::string> tokens);

  /// One token per line; id = zero-based line number.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::optional<std::int32_t> find(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.contains(token); }
  bool is_special(std::int32_t id) const { return id >= 0 && id < static_cast<std::int32_t>(kNumSpecials); }
  bool is_continuation(std::int32_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Lowercases, strips accents (NFD then drop Mn), removes digits (Nd),
/// turns punctuation (P*) into spaces, collapses whitespace and trims.
std::string canonicalize(std::string_view text);

/// Canonicalized text split on spaces.
std::vector<std::string> canonical_words(std::string_view text);

/// Words longer than this many code points become a single [UNK].
inline constexpr std::size_t kMaxWordChars = 100;

/// Greedy longest-match-first segmentation of one canonical word. Returns
/// {"[UNK]"} when some position has no matching piece.
std::vector<std::string> wordpiece(std::string_view word, const Vocab& vocab);
std::vector<std::int32_t> wordpiece_ids(std::string_view word, const Vocab& vocab);

/// Piece ids for a whole text (canonicalized first).
std::vector<std::int32_t> text_piece_ids(std::string_view text, const Vocab& vocab);

/// Vocab of the specials, every character of the canonical corpus in plain
/// and "##" form, then the most frequent whole words and word-internal
/// ("##") substrings until target_size. Frequency ties break on the token
/// string. Throws TargetTooSmall when target_size cannot hold the specials
/// and the alphabet.
Vocab build_vocab(std::span<const std::string> sentences, std::size_t target_size);

/// Model-ready sequence of fixed length.
struct TokenSequence {
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> mask;
  std::size_t n_real = 0;

  std::size_t max_len() const { return ids.size(); }
};

/// [CLS] pieces [SEP] then padding. Pieces beyond max_len - 2 are dropped
/// from the right. max_len must be at least 3.
TokenSequence encode(std::string_view text, const Vocab& vocab, std::size_t max_len);

/// [CLS] a [SEP] b [SEP] then padding, segment 1 after the first [SEP].
/// While too long, drops the last piece of the longer side (b on ties).
/// max_len must be at least 5.
TokenSequence encode_pair(std::string_view a, std::string_view b, const Vocab& vocab,
                          std::size_t max_len);

/// Same framing from already tokenized piece ids.
TokenSequence frame_single(std::vector<std::int32_t> pieces, std::size_t max_len);
TokenSequence frame_pair(std::vector<std::int32_t> a, std::vector<std::int32_t> b,
                         std::size_t max_len);

/// Empty when seq satisfies the framing invariants, else a description of
/// the first violation.
std::string check_sequence(const TokenSequence& seq, bool pair);

}  // namespace sstbert::tokenizer
