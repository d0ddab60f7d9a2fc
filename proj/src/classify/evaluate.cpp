#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "sstbert/classify/classify.hpp"

namespace sstbert::classify {

double accuracy(std::span<const int> predictions, std::span<const int> golds) {
  if (predictions.size() != golds.size()) {
    throw LengthMismatch("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(golds.size()) + " golds");
  }
  if (golds.empty()) throw EmptyInput("accuracy of zero samples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) correct += predictions[i] == golds[i];
  return static_cast<double>(correct) / static_cast<double>(golds.size());
}

std::vector<Cell> cells_for(Task task, std::string_view scopes) {
  std::vector<Cell> out;
  std::size_t start = 0;
  while (start <= scopes.size()) {
    std::size_t end = scopes.find(',', start);
    if (end == std::string_view::npos) end = scopes.size();
    const Cell cell{task, parse_scope(scopes.substr(start, end - start))};
    if (std::find(out.begin(), out.end(), cell) == out.end()) out.push_back(cell);
    start = end + 1;
  }
  return out;
}

namespace {

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

std::optional<double> mean_accuracy(const std::vector<CellResult>& cells) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& c : cells) {
    if (!c.accuracy) continue;
    total += *c.accuracy;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

}  // namespace

std::string EvalReport::to_tsv() const {
  std::string out = "task\tscope\tn\taccuracy\n";
  for (const auto& c : cells) {
    out += std::string(task_name(c.cell.task)) + "\t" + std::string(scope_name(c.cell.scope)) + "\t" +
           std::to_string(c.n) + "\t" + (c.accuracy ? percent(*c.accuracy) : "--") + "\n";
  }
  out += "# split: " + split + " (standard SST train/dev/test split)\n";
  out += "# phrases scored per occurrence; empty cells show -- and are left out of the mean\n";
  if (const auto mean = mean_accuracy(cells)) out += "# mean accuracy: " + percent(*mean) + "\n";
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["split"] = split;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json cell;
    cell["task"] = task_name(c.cell.task);
    cell["scope"] = scope_name(c.cell.scope);
    cell["n"] = c.n;
    cell["correct"] = c.correct;
    cell["accuracy"] = c.accuracy ? nlohmann::ordered_json(*c.accuracy) : nlohmann::ordered_json(nullptr);
    cell["percent"] = c.accuracy ? percent(*c.accuracy) : "--";
    cell["flagged"] = !c.accuracy.has_value();
    j["cells"].push_back(cell);
  }
  const auto mean = mean_accuracy(cells);
  j["mean_accuracy"] = mean ? nlohmann::ordered_json(*mean) : nlohmann::ordered_json(nullptr);
  return j.dump(2) + "\n";
}

EvalReport evaluate(const Predictor& predictor, Task model_task,
                    std::span<const treebank::PhraseTree> trees, std::span<const Cell> cells,
                    std::string split) {
  for (const auto& cell : cells) {
    if (cell.task != model_task) {
      throw LabelSpaceMismatch("cell " + std::string(task_name(cell.task)) + " requested from a " +
                               std::string(task_name(model_task)) + " model");
    }
  }
  const auto examples = project_trees(trees, model_task);
  const auto guesses = examples.empty() ? std::vector<int>{} : predictor(examples);
  if (guesses.size() != examples.size()) throw LengthMismatch("predictor returned the wrong count");

  EvalReport report{std::move(split), {}};
  for (const auto& cell : cells) {
    CellResult r{cell, 0, 0, std::nullopt};
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (cell.scope == Scope::root && !examples[i].is_root) continue;
      ++r.n;
      r.correct += guesses[i] == examples[i].label;
    }
    if (r.n > 0) r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.n);
    report.cells.push_back(r);
  }
  return report;
}

EvalReport evaluate(const ClassifierModel& model, const Vocab& vocab,
                    std::span<const treebank::PhraseTree> trees, std::span<const Cell> cells,
                    std::size_t max_len, std::string split) {
  const Predictor predictor = [&](std::span<const Example> examples) {
    std::vector<std::string> texts;
    texts.reserve(examples.size());
    for (const auto& ex : examples) texts.push_back(ex.text);
    std::vector<int> labels;
    for (const auto& p : predict(model, vocab, texts, max_len)) labels.push_back(p.label);
    return labels;
  };
  return evaluate(predictor, model.task, trees, cells, std::move(split));
}

}  // namespace sstbert::classify
