#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "sstbert/classify/classify.hpp"
#include "sstbert/numerics/ops.hpp"
#include "sstbert/numerics/optimizer.hpp"
#include "sstbert/numerics/tape.hpp"

namespace sstbert::classify {

namespace nx = numerics;

namespace {

ClassifierModel clone_model(const ClassifierModel& m) {
  return {m.config, encoder::clone_params(m.encoder),
          {m.head.w.clone(), m.head.b.clone(), m.head.dropout_p}, m.task};
}

double root_accuracy(const ClassifierModel& model, const Vocab& vocab,
                     std::span<const Example> dev_roots, std::size_t max_len) {
  std::vector<std::string> texts;
  std::vector<int> golds, guesses;
  for (const auto& ex : dev_roots) {
    texts.push_back(ex.text);
    golds.push_back(ex.label);
  }
  for (const auto& p : predict(model, vocab, texts, max_len)) guesses.push_back(p.label);
  return accuracy(guesses, golds);
}

}  // namespace

FinetuneResult finetune(std::span<const Example> train, std::span<const Example> dev,
                        const EncoderParams<float>& encoder, const ModelConfig& config,
                        const Vocab& vocab, Task task, const FinetuneHyper& hyper,
                        const FinetuneCallback& on_epoch) {
  if (hyper.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  const auto classes = static_cast<int>(num_classes(task));
  std::vector<tokenizer::TokenSequence> seqs;
  std::vector<std::int32_t> labels;
  for (const auto& ex : train) {
    if (ex.label < 0 || ex.label >= classes) {
      throw LabelSpaceMismatch("label " + std::to_string(ex.label) + " outside " +
                               std::string(task_name(task)));
    }
    if (hyper.train_scope == Scope::root && !ex.is_root) continue;
    seqs.push_back(tokenizer::encode(ex.text, vocab, hyper.max_len));
    labels.push_back(ex.label);
  }
  if (seqs.empty()) throw EmptyTrainingSet("no training examples in scope");
  std::vector<Example> dev_roots;
  for (const auto& ex : dev) {
    if (ex.label < 0 || ex.label >= classes) throw LabelSpaceMismatch("dev label outside task");
    if (ex.is_root) dev_roots.push_back(ex);
  }

  const Rng root(hyper.seed);
  Rng head_rng = root.fork(1);
  ClassifierModel model{config, encoder::clone_params(encoder),
                        init_head(config.hidden, num_classes(task), hyper.head_dropout, head_rng), task};
  FinetuneResult result{clone_model(model), 0, std::nullopt, {}};
  if (hyper.epochs == 0) return result;

  std::vector<nx::NamedTensor<float>> trainable;
  if (hyper.freeze_encoder) {
    model.encoder.set_requires_grad(false);
    trainable = {{"head.w", model.head.w}, {"head.b", model.head.b}};
  } else {
    model.encoder.set_requires_grad(true);
    trainable = model.named();
  }
  for (auto& p : trainable) p.tensor.set_requires_grad(true);
  nx::AdamW optimizer(trainable, {});

  const std::size_t per_epoch = (seqs.size() + hyper.batch_size - 1) / hyper.batch_size;
  const std::uint64_t total = per_epoch * hyper.epochs;
  const nx::LinearSchedule schedule{
      hyper.effective_lr(),
      static_cast<std::uint64_t>(std::llround(hyper.warmup_fraction * static_cast<double>(total))), total};

  std::vector<std::size_t> order(seqs.size());
  std::vector<tokenizer::TokenSequence> batch;
  std::vector<std::int32_t> batch_labels;
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = root.fork(100 + epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    Rng dropout_rng = root.fork(10000 + epoch);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      batch.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + hyper.batch_size); ++i) {
        batch.push_back(seqs[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      nx::Tape tape;
      {
        nx::TapeScope scope(tape);
        encoder::EncodeOptions options;
        // A frozen encoder is a fixed feature extractor: no dropout noise.
        options.training = !hyper.freeze_encoder;
        options.rng = &dropout_rng;
        const auto encoded = encoder::encode_batch<float>(batch, model.encoder, config, options);
        auto loss = nx::softmax_cross_entropy(head_logits(encoded.pooled, model.head, true, &dropout_rng),
                                              batch_labels);
        loss_sum += loss.item() * static_cast<double>(batch.size());
        nx::backward(loss);
      }
      optimizer.step(schedule.lr_at(step++));
    }

    EpochRecord record{epoch, loss_sum / static_cast<double>(seqs.size()), 0.0};
    if (!dev_roots.empty()) {
      record.dev_root_accuracy = root_accuracy(model, vocab, dev_roots, hyper.max_len);
      if (!result.best_dev_root_accuracy || record.dev_root_accuracy > *result.best_dev_root_accuracy) {
        result.best_dev_root_accuracy = record.dev_root_accuracy;
        result.best_epoch = epoch;
        result.model = clone_model(model);
      }
    } else {
      result.best_epoch = epoch;
      result.model = clone_model(model);
    }
    result.history.push_back(record);
    spdlog::info("finetune epoch {}/{} loss {:.4f} dev_root {:.4f}", epoch, hyper.epochs, record.train_loss,
                 record.dev_root_accuracy);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

}  // namespace sstbert::classify
