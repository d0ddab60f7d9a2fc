#include "sstbert/treebank/phrase_tree.hpp"

#include <algorithm>

namespace sstbert::treebank {

namespace {

bool valid_token(std::string_view token) {
  if (token.empty()) return false;
  return std::none_of(token.begin(), token.end(), [](char c) {
    return c == '(' || c == ')' || c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
           c == '\f' || c == '\v';
  });
}

void serialize_into(const PhraseTree& tree, std::string& out) {
  out += '(';
  out += static_cast<char>('0' + tree.label().value());
  if (tree.is_leaf()) {
    out += ' ';
    out += tree.token();
  } else {
    for (const auto& child : tree.children()) {
      out += ' ';
      serialize_into(child, out);
    }
  }
  out += ')';
}

void collect(const PhraseTree& tree, bool is_root, std::vector<PhraseRecord>& out) {
  out.push_back(PhraseRecord{tree.span_text(), tree.label(), is_root});
  for (const auto& child : tree.children()) collect(child, false, out);
}

}  // namespace

PhraseTree::PhraseTree(SentimentLabel label, std::string token, std::vector<PhraseTree> children)
    : label_(label), token_(std::move(token)), children_(std::move(children)) {
  if (children_.empty()) {
    span_text_ = token_;
    return;
  }
  for (const auto& child : children_) {
    if (!span_text_.empty()) span_text_ += ' ';
    span_text_ += child.span_text();
  }
}

PhraseTree PhraseTree::leaf(SentimentLabel label, std::string token) {
  if (!valid_token(token)) {
    throw std::invalid_argument("leaf token must be non-empty without whitespace or parentheses: '" +
                                token + "'");
  }
  return PhraseTree(label, std::move(token), {});
}

PhraseTree PhraseTree::internal(SentimentLabel label, std::vector<PhraseTree> children) {
  if (children.empty()) throw std::invalid_argument("internal node needs at least one child");
  return PhraseTree(label, {}, std::move(children));
}

std::size_t PhraseTree::node_count() const {
  std::size_t n = 1;
  for (const auto& child : children_) n += child.node_count();
  return n;
}

std::size_t PhraseTree::leaf_count() const {
  if (is_leaf()) return 1;
  std::size_t n = 0;
  for (const auto& child : children_) n += child.leaf_count();
  return n;
}

std::string serialize(const PhraseTree& tree) {
  std::string out;
  serialize_into(tree, out);
  return out;
}

std::vector<PhraseRecord> extract_phrases(const PhraseTree& tree) {
  std::vector<PhraseRecord> out;
  collect(tree, true, out);
  return out;
}

}  // namespace sstbert::treebank
