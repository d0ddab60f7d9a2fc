#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sstbert/treebank/phrase_tree.hpp"

namespace sstbert::treebank {

enum class Split { train, dev, test };

std::string_view to_string(Split split);
/// Accepts "train", "dev", "test"; throws std::invalid_argument otherwise.
Split parse_split(std::string_view name);
/// Standard SST distribution file name for a split ("train.txt", ...).
std::string split_file_name(Split split);

/// Trees of one split, in file order.
struct Corpus {
  Split split = Split::train;
  std::vector<PhraseTree> trees;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorpusParseError : public std::runtime_error {
 public:
  CorpusParseError(std::filesystem::path path, std::size_t line, const TreeParseError& inner);

  std::size_t line() const { return line_; }
  TreeParseError::Kind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  TreeParseError::Kind kind_;
  std::size_t offset_;
};

/// One tree per non-empty line. An empty file yields an empty corpus and a
/// warning.
Corpus load_corpus(const std::filesystem::path& path, Split split);

/// Loads train/dev/test from an SST distribution directory.
std::vector<Corpus> load_sst_directory(const std::filesystem::path& dir);

/// Root span texts, one per tree, in corpus order.
std::vector<std::string> sentences(const Corpus& corpus);

/// Every node of every tree as a record, corpus order then pre-order.
std::vector<PhraseRecord> all_phrases(const Corpus& corpus);

struct StatsReport {
  std::size_t sentences = 0;
  std::size_t nodes = 0;
  std::size_t unique_phrases = 0;
  std::array<std::size_t, 5> label_histogram{};
  std::array<std::size_t, 5> root_histogram{};

  /// Flat `key = value` lines.
  std::string to_text() const;
  std::string to_json() const;
};

/// Unique phrases are distinct span texts (exact, case-sensitive) across
/// all corpora together.
StatsReport corpus_stats(std::span<const Corpus> corpora);

}  // namespace sstbert::treebank
