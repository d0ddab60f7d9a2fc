#include <cmath>
#include <cstdio>
#include <numeric>

#include "sstbert/numerics/errors.hpp"
#include "sstbert/numerics/ops.hpp"
#include "sstbert/numerics/tape.hpp"
#include "sstbert/objectives/objectives.hpp"

namespace sstbert::objectives {

namespace nx = numerics;

namespace {

// NSP class ids.
constexpr std::int32_t kIsNext = 0;
constexpr std::int32_t kNotNext = 1;

Tensor<float> truncated_normal(nx::Shape shape, Rng& rng) {
  Tensor<float> t(std::move(shape));
  for (float& v : t.values()) {
    double z;
    do {
      z = rng.normal();
    } while (std::abs(z) > 2.0);
    v = static_cast<float>(0.02 * z);
  }
  return t;
}

}  // namespace

std::vector<nx::NamedTensor<float>> PretrainState::named() const {
  auto out = encoder.named();
  out.push_back({"mlm.b", mlm_b});
  out.push_back({"nsp.w", nsp_w});
  out.push_back({"nsp.b", nsp_b});
  return out;
}

PretrainState init_pretrain_state(const ModelConfig& config, Rng& rng,
                                  const nx::AdamWConfig& adam) {
  PretrainState state;
  state.config = config;
  Rng enc_rng = rng.fork(0);
  Rng head_rng = rng.fork(1);
  state.encoder = encoder::init_params(config, enc_rng);
  state.mlm_b = Tensor<float>({config.vocab});
  state.nsp_w = truncated_normal({config.hidden, 2}, head_rng);
  state.nsp_b = Tensor<float>({2});
  auto named = state.named();
  for (auto& p : named) p.tensor.set_requires_grad(true);
  state.optimizer = std::make_shared<nx::AdamW>(named, adam);
  return state;
}

template <typename T>
PretrainLosses<T> pretrain_losses(const EncoderParams<T>& enc, const Tensor<T>& mlm_b,
                                  const Tensor<T>& nsp_w, const Tensor<T>& nsp_b,
                                  const ModelConfig& config,
                                  std::span<const PretrainExample> batch, bool training, Rng* rng) {
  std::vector<TokenSequence> seqs;
  seqs.reserve(batch.size());
  for (const auto& ex : batch) seqs.push_back(ex.masked.seq);
  encoder::EncodeOptions options;
  options.training = training;
  options.rng = rng;
  const auto out = encoder::encode_batch<T>(seqs, enc, config, options);

  std::vector<std::int32_t> rows, targets, nsp_labels;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t pos : batch[b].masked.positions) {
      rows.push_back(static_cast<std::int32_t>(b * out.seq_len + pos));
      targets.push_back(batch[b].masked.targets[pos]);
    }
    nsp_labels.push_back(batch[b].is_next ? kIsNext : kNotNext);
  }
  if (rows.empty()) throw nx::ShapeMismatch("pretrain batch has no masked positions");

  PretrainLosses<T> losses;
  const Tensor<T> picked = nx::embedding_lookup(out.hidden, rows);
  const Tensor<T> mlm_logits = nx::add_row(nx::matmul(picked, nx::transpose(enc.tok)), mlm_b);
  losses.mlm = nx::softmax_cross_entropy(mlm_logits, targets);
  const Tensor<T> nsp_logits = nx::add_row(nx::matmul(out.pooled, nsp_w), nsp_b);
  losses.nsp = nx::softmax_cross_entropy(nsp_logits, nsp_labels);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::int32_t guess = nsp_logits[b * 2 + 1] > nsp_logits[b * 2] ? kNotNext : kIsNext;
    if (guess == nsp_labels[b]) ++losses.nsp_correct;
  }
  return losses;
}

StepResult pretrain_step(PretrainState& state, std::span<const PretrainExample> batch, double lr,
                         Rng& dropout_rng) {
  if (batch.empty()) throw std::invalid_argument("pretrain_step: empty batch");
  nx::Tape tape;
  StepResult result;
  {
    nx::TapeScope scope(tape);
    auto losses = pretrain_losses<float>(state.encoder, state.mlm_b, state.nsp_w, state.nsp_b,
                                         state.config, batch, true, &dropout_rng);
    result.mlm_loss = losses.mlm.item();
    result.nsp_loss = losses.nsp.item();
    result.nsp_accuracy = static_cast<double>(losses.nsp_correct) / static_cast<double>(batch.size());
    if (!std::isfinite(result.mlm_loss) || !std::isfinite(result.nsp_loss)) {
      throw nx::NumericsError("non-finite pretraining loss at step " + std::to_string(state.step));
    }
    auto total = nx::add(losses.mlm, losses.nsp);
    nx::backward(total);
  }
  state.optimizer->step(lr);
  ++state.step;
  state.history.push_back({state.step, result.mlm_loss, result.nsp_loss});
  return result;
}

void pretrain(PretrainState& state, std::span<const std::vector<std::int32_t>> sentences,
              const Vocab& vocab, const PretrainHyper& hyper, const EpochCallback& on_epoch) {
  if (state.epochs_done >= hyper.epochs) return;
  if (hyper.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  const Rng root(hyper.seed);
  Rng example_rng = root.fork(0);
  const auto examples = make_examples(sentences, vocab, hyper.max_len, example_rng, hyper.masking);
  if (examples.empty()) throw CorpusTooSmall("no pretraining example has a maskable token");

  const std::size_t per_epoch = (examples.size() + hyper.batch_size - 1) / hyper.batch_size;
  const std::uint64_t total = per_epoch * hyper.epochs;
  const nx::LinearSchedule schedule{
      hyper.lr, static_cast<std::uint64_t>(std::llround(hyper.warmup_fraction * static_cast<double>(total))),
      total};

  std::vector<std::size_t> order(examples.size());
  std::vector<PretrainExample> batch;
  for (std::uint64_t epoch = state.epochs_done; epoch < hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = root.fork(100 + epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    Rng dropout_rng = root.fork(10000 + epoch);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + hyper.batch_size); ++i) {
        batch.push_back(examples[order[i]]);
      }
      pretrain_step(state, batch, schedule.lr_at(state.step), dropout_rng);
    }
    state.epochs_done = epoch + 1;
    if (on_epoch) on_epoch(state);
  }
}

std::string loss_history_csv(const std::vector<LossRecord>& history) {
  std::string out = "step,mlm_loss,nsp_loss\n";
  char line[96];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%llu,%.6f,%.6f\n", static_cast<unsigned long long>(r.step),
                  r.mlm_loss, r.nsp_loss);
    out += line;
  }
  return out;
}

template PretrainLosses<float> pretrain_losses(const EncoderParams<float>&, const Tensor<float>&,
                                               const Tensor<float>&, const Tensor<float>&,
                                               const ModelConfig&, std::span<const PretrainExample>,
                                               bool, Rng*);
template PretrainLosses<double> pretrain_losses(const EncoderParams<double>&, const Tensor<double>&,
                                                const Tensor<double>&, const Tensor<double>&,
                                                const ModelConfig&, std::span<const PretrainExample>,
                                                bool, Rng*);

}  // namespace sstbert::objectives
