#include "sstbert/treebank/corpus.hpp"

#include <fstream>

#include <spdlog/spdlog.h>

namespace sstbert::treebank {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::dev:
      return "dev";
    case Split::test:
      return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

std::string split_file_name(Split split) { return std::string(to_string(split)) + ".txt"; }

CorpusParseError::CorpusParseError(std::filesystem::path path, std::size_t line,
                                   const TreeParseError& inner)
    : std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + inner.what()),
      line_(line),
      kind_(inner.kind()),
      offset_(inner.offset()) {}

Corpus load_corpus(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  Corpus corpus{split, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      corpus.trees.push_back(parse_tree(line));
    } catch (const TreeParseError& e) {
      throw CorpusParseError(path, line_no, e);
    }
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  if (corpus.trees.empty()) spdlog::warn("corpus file {} holds no trees", path.string());
  return corpus;
}

std::vector<Corpus> load_sst_directory(const std::filesystem::path& dir) {
  std::vector<Corpus> out;
  for (Split split : {Split::train, Split::dev, Split::test}) {
    const auto path = dir / split_file_name(split);
    if (!std::filesystem::exists(path)) {
      throw IoError("missing " + std::string(to_string(split)) + " file: " + path.string());
    }
    out.push_back(load_corpus(path, split));
  }
  return out;
}

std::vector<std::string> sentences(const Corpus& corpus) {
  std::vector<std::string> out;
  out.reserve(corpus.trees.size());
  for (const auto& tree : corpus.trees) out.push_back(tree.span_text());
  return out;
}

std::vector<PhraseRecord> all_phrases(const Corpus& corpus) {
  std::vector<PhraseRecord> out;
  for (const auto& tree : corpus.trees) {
    auto records = extract_phrases(tree);
    out.insert(out.end(), std::make_move_iterator(records.begin()),
               std::make_move_iterator(records.end()));
  }
  return out;
}

}  // namespace sstbert::treebank
