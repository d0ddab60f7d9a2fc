#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sstbert/encoder/encoder.hpp"
#include "sstbert/numerics/optimizer.hpp"
#include "sstbert/numerics/rng.hpp"
#include "sstbert/tokenizer/tokenizer.hpp"

namespace sstbert::objectives {

using encoder::EncoderParams;
using encoder::ModelConfig;
using numerics::Rng;
using numerics::Tensor;
using tokenizer::TokenSequence;
using tokenizer::Vocab;

class NoMaskablePositions : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorpusTooSmall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Target value at positions that are not predicted.
inline constexpr std::int32_t kNotPredicted = -1;

struct MaskingConfig {
  double rate = 0.15;
  /// Of the selected pieces: this share becomes [MASK], random_share a
  /// uniformly drawn non-special token, the rest stays unchanged.
  double mask_share = 0.8;
  double random_share = 0.1;
};

struct MaskedSequence {
  TokenSequence seq;
  /// Original id at every selected position, kNotPredicted elsewhere.
  std::vector<std::int32_t> targets;
  std::vector<std::size_t> positions;
};

/// Maskable positions are real tokens other than [CLS], [SEP] and [PAD].
/// A word (a piece plus its "##" continuations) is selected as a whole with
/// probability rate; when nothing is selected one word is forced. Throws
/// NoMaskablePositions when the sequence has no maskable position and
/// std::invalid_argument when rate is outside (0, 1).
MaskedSequence mask_tokens(const TokenSequence& seq, const Vocab& vocab, Rng& rng,
                           const MaskingConfig& config = {});

struct NspPair {
  TokenSequence seq;
  bool is_next = false;
};

/// For every adjacent pair (i, i+1): with probability is_next_prob the pair
/// itself, otherwise sentence i with a random other sentence that is neither
/// i+1 nor textually equal to it (when such a sentence exists). Sentences
/// are piece-id lists. Throws CorpusTooSmall below two sentences.
std::vector<NspPair> make_nsp_pairs(std::span<const std::vector<std::int32_t>> sentences,
                                    std::size_t max_len, Rng& rng, double is_next_prob = 0.5);

/// Text front end for make_nsp_pairs.
std::vector<NspPair> make_nsp_pairs(std::span<const std::string> sentences, const Vocab& vocab,
                                    std::size_t max_len, Rng& rng, double is_next_prob = 0.5);

/// One pretraining example: a masked NSP pair.
struct PretrainExample {
  MaskedSequence masked;
  bool is_next = false;
};

std::vector<PretrainExample> make_examples(std::span<const std::vector<std::int32_t>> sentences,
                                           const Vocab& vocab, std::size_t max_len, Rng& rng,
                                           const MaskingConfig& masking = {});

struct LossRecord {
  std::uint64_t step = 0;
  double mlm_loss = 0.0;
  double nsp_loss = 0.0;
};

struct PretrainState {
  ModelConfig config;
  EncoderParams<float> encoder;
  /// MLM output bias over the vocab; the projection is tied to emb.tok.
  Tensor<float> mlm_b;
  Tensor<float> nsp_w;
  Tensor<float> nsp_b;
  std::shared_ptr<numerics::AdamW> optimizer;
  std::uint64_t step = 0;
  std::uint64_t epochs_done = 0;
  std::vector<LossRecord> history;

  /// Encoder tensors followed by mlm.b, nsp.w, nsp.b.
  std::vector<numerics::NamedTensor<float>> named() const;
};

PretrainState init_pretrain_state(const ModelConfig& config, Rng& rng,
                                  const numerics::AdamWConfig& adam = {});

struct StepResult {
  double mlm_loss = 0.0;
  double nsp_loss = 0.0;
  double nsp_accuracy = 0.0;
};

/// Heads' losses for a batch without updating anything.
template <typename T>
struct PretrainLosses {
  Tensor<T> mlm;
  Tensor<T> nsp;
  std::size_t nsp_correct = 0;
};

template <typename T>
PretrainLosses<T> pretrain_losses(const EncoderParams<T>& encoder, const Tensor<T>& mlm_b,
                                  const Tensor<T>& nsp_w, const Tensor<T>& nsp_b,
                                  const ModelConfig& config,
                                  std::span<const PretrainExample> batch, bool training, Rng* rng);

/// Joint loss mlm + nsp, backward, one optimizer step at lr. Appends to the
/// loss history and advances the step counter.
StepResult pretrain_step(PretrainState& state, std::span<const PretrainExample> batch, double lr,
                         Rng& dropout_rng);

struct PretrainHyper {
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  double warmup_fraction = 0.1;
  std::size_t max_len = 64;
  MaskingConfig masking;
  std::uint64_t seed = 0;
};

using EpochCallback = std::function<void(const PretrainState&)>;

/// Continues from state.epochs_done up to hyper.epochs. Examples are built
/// once from the seed; each epoch shuffles them with its own stream, so a
/// resumed run retraces an uninterrupted one. on_epoch runs after every
/// finished epoch.
void pretrain(PretrainState& state, std::span<const std::vector<std::int32_t>> sentences,
              const Vocab& vocab, const PretrainHyper& hyper, const EpochCallback& on_epoch = {});

/// `step,mlm_loss,nsp_loss` header then one line per step.
std::string loss_history_csv(const std::vector<LossRecord>& history);

}  // namespace sstbert::objectives
