#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sstbert/treebank/label.hpp"

namespace sstbert::treebank {

/// Labeled constituency node. Immutable once built; span_text is the
/// space-joined leaf tokens under the node.
class PhraseTree {
 public:
  /// Throws std::invalid_argument if token is empty or contains whitespace
  /// or parentheses.
  static PhraseTree leaf(SentimentLabel label, std::string token);
  /// Throws std::invalid_argument if children is empty.
  static PhraseTree internal(SentimentLabel label, std::vector<PhraseTree> children);

  SentimentLabel label() const { return label_; }
  bool is_leaf() const { return children_.empty(); }
  const std::string& token() const { return token_; }
  const std::vector<PhraseTree>& children() const { return children_; }
  const std::string& span_text() const { return span_text_; }

  std::size_t node_count() const;
  std::size_t leaf_count() const;

 private:
  PhraseTree(SentimentLabel label, std::string token, std::vector<PhraseTree> children);

  SentimentLabel label_;
  std::string token_;
  std::vector<PhraseTree> children_;
  std::string span_text_;
};

/// One labeled node flattened out of a tree.
struct PhraseRecord {
  std::string text;
  SentimentLabel label;
  bool is_root = false;
};

class TreeParseError : public std::runtime_error {
 public:
  enum class Kind { UnbalancedParens, InvalidLabel, EmptyNode, TrailingGarbage };

  TreeParseError(Kind kind, std::size_t offset, const std::string& detail);

  Kind kind() const { return kind_; }
  /// Byte offset into the parsed line.
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

std::string_view to_string(TreeParseError::Kind kind);

/// Parses one PTB-style bracketed tree: `(<digit> <token>)` or
/// `(<digit> <child> ...)`.
PhraseTree parse_tree(std::string_view line);

/// Canonical bracketing: single spaces between items, none inside parens.
std::string serialize(const PhraseTree& tree);

/// Brings any bracketed string into the layout serialize() produces.
std::string normalize_bracketing(std::string_view text);

/// One record per node in pre-order; the first is the root.
std::vector<PhraseRecord> extract_phrases(const PhraseTree& tree);

}  // namespace sstbert::treebank
