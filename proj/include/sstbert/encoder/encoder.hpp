#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sstbert/encoder/config.hpp"
#include "sstbert/encoder/params.hpp"
#include "sstbert/numerics/rng.hpp"
#include "sstbert/tokenizer/tokenizer.hpp"

namespace sstbert::encoder {

struct EncodeOptions {
  bool training = false;
  /// Required when training with dropout_p > 0.
  numerics::Rng* rng = nullptr;
  /// Cut every sequence to the longest n_real in the batch. Real rows are
  /// unaffected because padded keys receive zero attention weight.
  bool trim_padding = true;
  /// Keep each layer's pre-dropout attention probabilities.
  bool keep_attention = false;
};

template <typename T>
struct EncoderOutput {
  /// [batch*seq_len x H], sequence b occupying rows b*seq_len onward.
  Tensor<T> hidden;
  /// [batch x H]: tanh(hidden[cls] . pooler.w + pooler.b).
  Tensor<T> pooled;
  std::size_t seq_len = 0;
  /// Per layer, [batch*heads*seq_len x seq_len].
  std::vector<Tensor<T>> attention;
};

/// One post-norm Transformer block over stacked sequences:
/// LN(x + drop(attn(x))) then LN(y + drop(ffn(y))).
template <typename T>
Tensor<T> attention_block(const Tensor<T>& x, const LayerParams<T>& layer,
                          std::span<const std::int32_t> mask, std::size_t batch,
                          const ModelConfig& config, const EncodeOptions& options,
                          Tensor<T>* attention_out = nullptr);

/// Encodes a batch of equally long sequences. Throws numerics::IndexOutOfRange
/// for ids outside the vocab and ParamError when the sequence length exceeds
/// max_positions.
template <typename T>
EncoderOutput<T> encode_batch(std::span<const tokenizer::TokenSequence> batch,
                              const EncoderParams<T>& params, const ModelConfig& config,
                              const EncodeOptions& options = {});

/// Single sequence at full length: hidden [max_len x H], pooled [H].
template <typename T>
EncoderOutput<T> encode(const tokenizer::TokenSequence& seq, const EncoderParams<T>& params,
                        const ModelConfig& config, bool training = false,
                        numerics::Rng* rng = nullptr);

}  // namespace sstbert::encoder
