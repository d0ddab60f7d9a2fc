#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sstbert/encoder/encoder.hpp"
#include "sstbert/numerics/rng.hpp"
#include "sstbert/numerics/tensor_io.hpp"
#include "sstbert/tokenizer/tokenizer.hpp"
#include "sstbert/treebank/phrase_tree.hpp"

namespace sstbert::classify {

using encoder::EncoderParams;
using encoder::ModelConfig;
using numerics::Rng;
using numerics::Tensor;
using tokenizer::Vocab;

class LabelSpaceMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyTrainingSet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Task { sst2, sst5 };
enum class Scope { all, root };

std::size_t num_classes(Task task);
std::string_view task_name(Task task);
std::string_view scope_name(Scope scope);
/// Throws std::invalid_argument for anything but "sst2" / "sst5".
Task parse_task(std::string_view name);
Scope parse_scope(std::string_view name);
/// Display name of class `label` under `task`.
std::string_view class_name(Task task, int label);

/// A phrase projected into a task's label space.
struct Example {
  std::string text;
  int label = 0;
  bool is_root = false;
};

/// sst5 keeps the five labels; sst2 drops neutral and maps to {0, 1}.
std::vector<Example> project(std::span<const treebank::PhraseRecord> records, Task task);

/// All phrase records of every tree, projected.
std::vector<Example> project_trees(std::span<const treebank::PhraseTree> trees, Task task);

template <typename T>
struct ClassifierHead {
  Tensor<T> w;  // [H x K]
  Tensor<T> b;  // [K]
  double dropout_p = 0.1;

  std::size_t classes() const { return b.size(); }
};

/// Truncated-normal (sigma 0.02) weights, zero bias. Throws
/// std::invalid_argument unless classes is 2 or 5.
ClassifierHead<float> init_head(std::size_t hidden, std::size_t classes, double dropout_p, Rng& rng);

template <typename To, typename From>
ClassifierHead<To> cast_head(const ClassifierHead<From>& head);

/// Logits [B x K] = dropout(pooled) * w + b. Throws ShapeMismatch when the
/// widths disagree.
template <typename T>
Tensor<T> head_logits(const Tensor<T>& pooled, const ClassifierHead<T>& head, bool training, Rng* rng);

struct Prediction {
  std::vector<double> probs;
  int label = 0;
};

/// Index of the largest value; the lowest index wins ties.
int argmax(std::span<const double> values);

/// pooled is [H] or [1 x H].
Prediction head_forward(const Tensor<float>& pooled, const ClassifierHead<float>& head, bool training,
                        Rng* rng);

struct ClassifierModel {
  ModelConfig config;
  EncoderParams<float> encoder;
  ClassifierHead<float> head;
  Task task = Task::sst5;

  /// Encoder tensors then head.w, head.b.
  std::vector<numerics::NamedTensor<float>> named() const;
};

/// Inference in batches; pure given the model and texts.
std::vector<Prediction> predict(const ClassifierModel& model, const Vocab& vocab,
                                std::span<const std::string> texts, std::size_t max_len,
                                std::size_t batch_size = 64);

struct FinetuneHyper {
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  /// Unset: 2e-5 for full fine-tuning, 1e-3 head-only.
  std::optional<double> lr;
  double warmup_fraction = 0.1;
  std::size_t max_len = 64;
  bool freeze_encoder = false;
  /// Train on every phrase record (all) or on sentence roots only.
  Scope train_scope = Scope::all;
  double head_dropout = 0.1;
  std::uint64_t seed = 0;

  double effective_lr() const { return lr.value_or(freeze_encoder ? 1e-3 : 2e-5); }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_root_accuracy = 0.0;
};

struct FinetuneResult {
  /// Weights of the epoch with the best dev root accuracy (earliest on
  /// ties). Without dev roots, the last epoch.
  ClassifierModel model;
  std::size_t best_epoch = 0;
  std::optional<double> best_dev_root_accuracy;
  std::vector<EpochRecord> history;
};

using FinetuneCallback = std::function<void(const EpochRecord&)>;

/// Fine-tunes a copy of `encoder` plus a fresh head. The inputs are never
/// modified; 0 epochs returns the encoder unchanged with the initial head.
/// Throws EmptyTrainingSet when the training scope selects nothing and
/// LabelSpaceMismatch when a label falls outside the task's classes.
FinetuneResult finetune(std::span<const Example> train, std::span<const Example> dev,
                        const EncoderParams<float>& encoder, const ModelConfig& config,
                        const Vocab& vocab, Task task, const FinetuneHyper& hyper,
                        const FinetuneCallback& on_epoch = {});

/// Correct / total. Throws LengthMismatch or EmptyInput.
double accuracy(std::span<const int> predictions, std::span<const int> golds);

struct Cell {
  Task task;
  Scope scope;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Parses "all,root" style scope lists for one task.
std::vector<Cell> cells_for(Task task, std::string_view scopes);

struct CellResult {
  Cell cell;
  std::size_t n = 0;
  std::size_t correct = 0;
  /// Unset for an empty cell, which is flagged and kept out of averages.
  std::optional<double> accuracy;
};

struct EvalReport {
  std::string split;
  std::vector<CellResult> cells;

  /// Header `task<TAB>scope<TAB>n<TAB>accuracy`, percentages with one
  /// decimal ("--" for empty cells), then `#` footer lines.
  std::string to_tsv() const;
  std::string to_json() const;
};

/// Maps projected examples to predicted labels.
using Predictor = std::function<std::vector<int>(std::span<const Example>)>;

/// Scores every requested cell. "all" uses every phrase record, "root" only
/// roots; sst2 cells drop neutral golds. Throws LabelSpaceMismatch when a
/// cell's task differs from model_task.
EvalReport evaluate(const Predictor& predictor, Task model_task,
                    std::span<const treebank::PhraseTree> trees, std::span<const Cell> cells,
                    std::string split = "dev");

EvalReport evaluate(const ClassifierModel& model, const Vocab& vocab,
                    std::span<const treebank::PhraseTree> trees, std::span<const Cell> cells,
                    std::size_t max_len, std::string split = "dev");

}  // namespace sstbert::classify
