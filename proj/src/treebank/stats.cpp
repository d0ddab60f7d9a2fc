#include <sstream>
#include <string_view>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sstbert/treebank/corpus.hpp"

namespace sstbert::treebank {

namespace {

void visit(const PhraseTree& node, StatsReport& report,
           std::unordered_set<std::string_view>& seen) {
  ++report.nodes;
  ++report.label_histogram[static_cast<std::size_t>(node.label().value())];
  seen.insert(node.span_text());
  for (const auto& child : node.children()) visit(child, report, seen);
}

}  // namespace

StatsReport corpus_stats(std::span<const Corpus> corpora) {
  StatsReport report;
  // Views stay valid: the trees outlive this call.
  std::unordered_set<std::string_view> seen;
  for (const auto& corpus : corpora) {
    for (const auto& tree : corpus.trees) {
      ++report.sentences;
      ++report.root_histogram[static_cast<std::size_t>(tree.label().value())];
      visit(tree, report, seen);
    }
  }
  report.unique_phrases = seen.size();
  return report;
}

std::string StatsReport::to_text() const {
  std::ostringstream out;
  out << "sentences = " << sentences << '\n';
  out << "nodes = " << nodes << '\n';
  out << "unique_phrases = " << unique_phrases << '\n';
  for (std::size_t k = 0; k < label_histogram.size(); ++k) {
    out << "label." << k << " = " << label_histogram[k] << '\n';
  }
  for (std::size_t k = 0; k < root_histogram.size(); ++k) {
    out << "root_label." << k << " = " << root_histogram[k] << '\n';
  }
  return out.str();
}

std::string StatsReport::to_json() const {
  nlohmann::ordered_json j;
  j["sentences"] = sentences;
  j["nodes"] = nodes;
  j["unique_phrases"] = unique_phrases;
  j["label_histogram"] = label_histogram;
  j["root_histogram"] = root_histogram;
  return j.dump(2) + "\n";
}

}  // namespace sstbert::treebank
