
#include "sstbert/treebank/phrase_tree.hpp"

namespace sstbert::treebank {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_token_char(char c) { return !is_space(c) && c != '(' && c != ')'; }

using Kind = TreeParseError::Kind;

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  PhraseTree parse_document() {
    skip_space();
    if (pos_ == text_.size()) throw TreeParseError(Kind::EmptyNode, pos_, "no tree in input");
    PhraseTree tree = parse_node();
    skip_space();
    if (pos_ < text_.size()) {
      if (text_[pos_] == ')') throw TreeParseError(Kind::UnbalancedParens, pos_, "unmatched ')'");
      throw TreeParseError(Kind::TrailingGarbage, pos_, "content after the tree");
    }
    return tree;
  }

 private:
  PhraseTree parse_node() {
    if (pos_ >= text_.size() || text_[pos_] != '(') {
      throw TreeParseError(Kind::UnbalancedParens, pos_, "expected '('");
    }
    const std::size_t open = pos_++;
    skip_space();
    if (pos_ >= text_.size()) throw TreeParseError(Kind::UnbalancedParens, open, "unclosed '('");
    if (text_[pos_] == ')') throw TreeParseError(Kind::EmptyNode, open, "empty node");

    const std::size_t label_at = pos_;
    std::size_t label_end = pos_;
    while (label_end < text_.size() && is_token_char(text_[label_end])) ++label_end;
    const std::string_view label_text = text_.substr(label_at, label_end - label_at);
    if (label_text.size() != 1 || label_text[0] < '0' || label_text[0] > '4') {
      throw TreeParseError(Kind::InvalidLabel, label_at,
                           "label must be a single digit 0-4, got '" + std::string(label_text) + "'");
    }
    const SentimentLabel label(label_text[0] - '0');
    pos_ = label_end;
    skip_space();
    if (pos_ >= text_.size()) throw TreeParseError(Kind::UnbalancedParens, open, "unclosed '('");
    if (text_[pos_] == ')') throw TreeParseError(Kind::EmptyNode, open, "node has a label but no content");

    if (text_[pos_] != '(') {
      const std::size_t token_at = pos_;
      while (pos_ < text_.size() && is_token_char(text_[pos_])) ++pos_;
      std::string token(text_.substr(token_at, pos_ - token_at));
      skip_space();
      if (pos_ >= text_.size()) throw TreeParseError(Kind::UnbalancedParens, open, "unclosed '('");
      if (text_[pos_] != ')') {
        throw TreeParseError(Kind::TrailingGarbage, pos_, "leaf holds more than one token");
      }
      ++pos_;
      return PhraseTree::leaf(label, std::move(token));
    }

    std::vector<PhraseTree> children;
    while (true) {
      skip_space();
      if (pos_ >= text_.size()) throw TreeParseError(Kind::UnbalancedParens, open, "unclosed '('");
      if (text_[pos_] == ')') {
        ++pos_;
        break;
      }
      if (text_[pos_] != '(') {
        throw TreeParseError(Kind::TrailingGarbage, pos_, "bare token among child nodes");
      }
      children.push_back(parse_node());
    }
    return PhraseTree::internal(label, std::move(children));
  }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

TreeParseError::TreeParseError(Kind kind, std::size_t offset, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + " at byte " + std::to_string(offset) +
                         ": " + detail),
      kind_(kind),
      offset_(offset) {}

std::string_view to_string(TreeParseError::Kind kind) {
  switch (kind) {
    case Kind::UnbalancedParens:
      return "UnbalancedParens";
    case Kind::InvalidLabel:
      return "InvalidLabel";
    case Kind::EmptyNode:
      return "EmptyNode";
    case Kind::TrailingGarbage:
      return "TrailingGarbage";
  }
  return "Unknown";
}

PhraseTree parse_tree(std::string_view line) { return Parser(line).parse_document(); }

std::string normalize_bracketing(std::string_view text) {
  std::string out;
  std::size_t i = 0;
  char prev = '\0';  // last emitted item class: '(' , ')' or 'w'
  while (i < text.size()) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (c == '(') {
      if (prev == ')' || prev == 'w') out += ' ';
      out += '(';
      prev = '(';
      ++i;
    } else if (c == ')') {
      out += ')';
      prev = ')';
      ++i;
    } else {
      if (prev == ')' || prev == 'w') out += ' ';
      while (i < text.size() && is_token_char(text[i])) out += text[i++];
      prev = 'w';
    }
  }
  return out;
}

}  // namespace sstbert::treebank
