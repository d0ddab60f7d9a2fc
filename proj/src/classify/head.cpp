#include <algorithm>
#include <cmath>

#include "sstbert/classify/classify.hpp"
#include "sstbert/numerics/errors.hpp"
#include "sstbert/numerics/ops.hpp"
#include "sstbert/treebank/label.hpp"

namespace sstbert::classify {

namespace nx = numerics;

std::size_t num_classes(Task task) { return task == Task::sst2 ? 2 : 5; }

std::string_view task_name(Task task) { return task == Task::sst2 ? "sst2" : "sst5"; }

std::string_view scope_name(Scope scope) { return scope == Scope::all ? "all" : "root"; }

Task parse_task(std::string_view name) {
  if (name == "sst2") return Task::sst2;
  if (name == "sst5") return Task::sst5;
  throw std::invalid_argument("unknown task '" + std::string(name) + "' (expected sst2 or sst5)");
}

Scope parse_scope(std::string_view name) {
  if (name == "all") return Scope::all;
  if (name == "root") return Scope::root;
  throw std::invalid_argument("unknown scope '" + std::string(name) + "' (expected all or root)");
}

std::string_view class_name(Task task, int label) {
  if (task == Task::sst5) return treebank::sentiment_name(label);
  if (label != 0 && label != 1) throw LabelSpaceMismatch("sst2 label out of range");
  return treebank::to_string(static_cast<treebank::BinaryLabel>(label));
}

std::vector<Example> project(std::span<const treebank::PhraseRecord> records, Task task) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (task == Task::sst5) {
      out.push_back({r.text, r.label.value(), r.is_root});
    } else if (const auto binary = treebank::to_binary(r.label)) {
      out.push_back({r.text, static_cast<int>(*binary), r.is_root});
    }
  }
  return out;
}

std::vector<Example> project_trees(std::span<const treebank::PhraseTree> trees, Task task) {
  std::vector<Example> out;
  for (const auto& tree : trees) {
    const auto records = treebank::extract_phrases(tree);
    auto projected = project(records, task);
    out.insert(out.end(), std::make_move_iterator(projected.begin()),
               std::make_move_iterator(projected.end()));
  }
  return out;
}

ClassifierHead<float> init_head(std::size_t hidden, std::size_t classes, double dropout_p, Rng& rng) {
  if (classes != 2 && classes != 5) {
    throw std::invalid_argument("classifier head needs 2 or 5 classes, got " + std::to_string(classes));
  }
  ClassifierHead<float> head{Tensor<float>({hidden, classes}), Tensor<float>({classes}), dropout_p};
  for (float& v : head.w.values()) {
    double z;
    do {
      z = rng.normal();
    } while (std::abs(z) > 2.0);
    v = static_cast<float>(0.02 * z);
  }
  return head;
}

template <typename To, typename From>
ClassifierHead<To> cast_head(const ClassifierHead<From>& head) {
  return {nx::tensor_cast<To>(head.w), nx::tensor_cast<To>(head.b), head.dropout_p};
}

template <typename T>
Tensor<T> head_logits(const Tensor<T>& pooled, const ClassifierHead<T>& head, bool training, Rng* rng) {
  if (pooled.rank() != 2 || head.w.rank() != 2 || pooled.dim(1) != head.w.dim(0) ||
      head.b.size() != head.w.dim(1)) {
    throw nx::ShapeMismatch("head_logits: pooled " + nx::shape_string(pooled.shape()) + " vs head " +
                            nx::shape_string(head.w.shape()));
  }
  const Tensor<T> dropped = nx::dropout(pooled, head.dropout_p, training, rng);
  return nx::add_row(nx::matmul(dropped, head.w), head.b);
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw EmptyInput("argmax of an empty vector");
  // max_element keeps the first of equal maxima.
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

namespace {

Prediction from_logits(std::span<const float> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  Prediction p;
  p.probs.resize(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p.probs[k] = std::exp(static_cast<double>(logits[k]) - top);
    total += p.probs[k];
  }
  for (double& v : p.probs) v /= total;
  p.label = argmax(p.probs);
  return p;
}

}  // namespace

Prediction head_forward(const Tensor<float>& pooled, const ClassifierHead<float>& head, bool training,
                        Rng* rng) {
  const std::size_t width = pooled.size();
  if (!(pooled.rank() == 1 || (pooled.rank() == 2 && pooled.dim(0) == 1))) {
    throw nx::ShapeMismatch("head_forward expects one pooled vector, got " +
                            nx::shape_string(pooled.shape()));
  }
  const Tensor<float> logits = head_logits(nx::reshape(pooled, {1, width}), head, training, rng);
  return from_logits(logits.values());
}

std::vector<numerics::NamedTensor<float>> ClassifierModel::named() const {
  auto out = encoder.named();
  out.push_back({"head.w", head.w});
  out.push_back({"head.b", head.b});
  return out;
}

std::vector<Prediction> predict(const ClassifierModel& model, const Vocab& vocab,
                                std::span<const std::string> texts, std::size_t max_len,
                                std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  std::vector<Prediction> out;
  out.reserve(texts.size());
  std::vector<tokenizer::TokenSequence> batch;
  for (std::size_t start = 0; start < texts.size(); start += batch_size) {
    batch.clear();
    for (std::size_t i = start; i < std::min(texts.size(), start + batch_size); ++i) {
      batch.push_back(tokenizer::encode(texts[i], vocab, max_len));
    }
    const auto encoded = encoder::encode_batch<float>(batch, model.encoder, model.config);
    const Tensor<float> logits = head_logits(encoded.pooled, model.head, false, nullptr);
    const std::size_t k = model.head.classes();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      out.push_back(from_logits(logits.values().subspan(b * k, k)));
    }
  }
  return out;
}

template ClassifierHead<double> cast_head<double, float>(const ClassifierHead<float>&);
template ClassifierHead<float> cast_head<float, float>(const ClassifierHead<float>&);
template Tensor<float> head_logits(const Tensor<float>&, const ClassifierHead<float>&, bool, Rng*);
template Tensor<double> head_logits(const Tensor<double>&, const ClassifierHead<double>&, bool, Rng*);

}  // namespace sstbert::classify
