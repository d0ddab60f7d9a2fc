#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include <spdlog/spdlog.h>

#include "sstbert/tokenizer/tokenizer.hpp"
#include "utf8.hpp"

namespace sstbert::tokenizer {

Vocab::Vocab() : Vocab(std::vector<std::string>(kSpecials.begin(), kSpecials.end())) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumSpecials) throw VocabError("vocab holds fewer than the five special tokens");
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (tokens_[i] != kSpecials[i]) {
      throw VocabError("vocab line " + std::to_string(i) + " must be " + std::string(kSpecials[i]));
    }
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw VocabError("empty token at id " + std::to_string(i));
    if (!index_.emplace(tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw VocabError("duplicate token '" + tokens_[i] + "'");
    }
  }
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VocabError("cannot open vocab file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw VocabError("cannot write vocab file " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw VocabError("write error on " + path.string());
}

std::optional<std::int32_t> Vocab::find(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Vocab::is_continuation(std::int32_t id) const {
  return !is_special(id) && token(id).starts_with(kContinuation);
}

Vocab build_vocab(std::span<const std::string> sentences, std::size_t target_size) {
  std::map<std::string, std::size_t> word_counts;
  for (const auto& s : sentences) {
    for (auto& w : canonical_words(s)) ++word_counts[std::move(w)];
  }

  std::set<std::string> alphabet;
  std::map<std::string, std::size_t> candidates;
  for (const auto& [word, count] : word_counts) {
    const auto offsets = detail::code_point_offsets(word);
    const std::size_t n = offsets.size() - 1;
    for (std::size_t i = 0; i < n; ++i) alphabet.insert(word.substr(offsets[i], offsets[i + 1] - offsets[i]));
    if (n >= 2) candidates[word] += count;
    const std::size_t max_piece = std::min(n, kMaxWordChars);
    for (std::size_t i = 1; i < n; ++i) {
      for (std::size_t j = i + 2; j <= n && j - i <= max_piece; ++j) {
        candidates[std::string(Vocab::kContinuation) + word.substr(offsets[i], offsets[j] - offsets[i])] +=
            count;
      }
    }
  }

  const std::size_t required = Vocab::kNumSpecials + 2 * alphabet.size();
  if (target_size < required) {
    throw TargetTooSmall("target size " + std::to_string(target_size) + " is below the " +
                         std::to_string(required) + " tokens needed for specials and alphabet");
  }

  std::vector<std::string> tokens(Vocab::kSpecials.begin(), Vocab::kSpecials.end());
  for (const auto& c : alphabet) tokens.push_back(c);
  for (const auto& c : alphabet) tokens.push_back(std::string(Vocab::kContinuation) + c);

  std::vector<std::pair<std::string, std::size_t>> ranked(candidates.begin(), candidates.end());
  // `candidates` is already in lexicographic order; a stable sort on count
  // keeps that order within equal counts.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [token, count] : ranked) {
    if (tokens.size() >= target_size) break;
    tokens.push_back(token);
  }
  if (tokens.size() < target_size) {
    spdlog::warn("vocab candidates exhausted at {} tokens (target {})", tokens.size(), target_size);
  }
  return Vocab(std::move(tokens));
}

}  // namespace sstbert::tokenizer
