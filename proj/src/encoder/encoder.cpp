#include "sstbert/encoder/encoder.hpp"

#include <algorithm>

#include "sstbert/numerics/errors.hpp"
#include "sstbert/numerics/ops.hpp"

namespace sstbert::encoder {

namespace nx = numerics;

namespace {

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return nx::add_row(nx::matmul(x, w), b);
}

}  // namespace

template <typename T>
Tensor<T> attention_block(const Tensor<T>& x, const LayerParams<T>& layer,
                          std::span<const std::int32_t> mask, std::size_t batch,
                          const ModelConfig& config, const EncodeOptions& options,
                          Tensor<T>* attention_out) {
  const double p = config.dropout_p;
  const bool train = options.training;
  const Tensor<T> q = linear(x, layer.q_w, layer.q_b);
  const Tensor<T> k = linear(x, layer.k_w, layer.k_b);
  const Tensor<T> v = linear(x, layer.v_w, layer.v_b);
  const Tensor<T> ctx = nx::multi_head_attention(q, k, v, batch, config.heads, mask, p, train,
                                                 options.rng, attention_out);
  const Tensor<T> attn = nx::dropout(linear(ctx, layer.o_w, layer.o_b), p, train, options.rng);
  const Tensor<T> y = nx::layer_norm(nx::add(x, attn), layer.ln1_g, layer.ln1_b);
  const Tensor<T> inner = nx::gelu(linear(y, layer.ffn_in_w, layer.ffn_in_b));
  const Tensor<T> ffn = nx::dropout(linear(inner, layer.ffn_out_w, layer.ffn_out_b), p, train, options.rng);
  return nx::layer_norm(nx::add(y, ffn), layer.ln2_g, layer.ln2_b);
}

template <typename T>
EncoderOutput<T> encode_batch(std::span<const tokenizer::TokenSequence> batch,
                              const EncoderParams<T>& params, const ModelConfig& config,
                              const EncodeOptions& options) {
  if (batch.empty()) throw nx::ShapeMismatch("encode_batch: empty batch");
  const std::size_t full = batch.front().max_len();
  std::size_t n = 0;
  for (const auto& seq : batch) {
    if (seq.max_len() != full) throw nx::ShapeMismatch("encode_batch: sequences differ in max_len");
    n = std::max(n, seq.n_real);
  }
  if (!options.trim_padding) n = full;
  n = std::max<std::size_t>(n, 1);
  if (n > config.max_positions) {
    throw ParamError("sequence length " + std::to_string(n) + " exceeds max_positions " +
                     std::to_string(config.max_positions));
  }

  const std::size_t b = batch.size();
  std::vector<std::int32_t> ids(b * n), positions(b * n), segments(b * n), mask(b * n), cls(b);
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      ids[s * n + i] = batch[s].ids[i];
      positions[s * n + i] = static_cast<std::int32_t>(i);
      segments[s * n + i] = batch[s].segment_ids[i];
      mask[s * n + i] = batch[s].mask[i];
    }
    cls[s] = static_cast<std::int32_t>(s * n);
  }

  const double p = config.dropout_p;
  Tensor<T> x = nx::add(nx::add(nx::embedding_lookup(params.tok, ids),
                                nx::embedding_lookup(params.pos, positions)),
                        nx::embedding_lookup(params.seg, segments));
  x = nx::dropout(nx::layer_norm(x, params.emb_ln_g, params.emb_ln_b), p, options.training, options.rng);

  EncoderOutput<T> out;
  out.seq_len = n;
  for (const auto& layer : params.layers) {
    Tensor<T> probs;
    x = attention_block(x, layer, mask, b, config, options, options.keep_attention ? &probs : nullptr);
    if (options.keep_attention) out.attention.push_back(std::move(probs));
  }
  out.pooled = nx::tanh(linear(nx::embedding_lookup(x, cls), params.pooler_w, params.pooler_b));
  out.hidden = std::move(x);
  return out;
}

template <typename T>
EncoderOutput<T> encode(const tokenizer::TokenSequence& seq, const EncoderParams<T>& params,
                        const ModelConfig& config, bool training, numerics::Rng* rng) {
  EncodeOptions options;
  options.training = training;
  options.rng = rng;
  options.trim_padding = false;
  auto out = encode_batch<T>(std::span(&seq, 1), params, config, options);
  out.pooled = nx::reshape(out.pooled, {config.hidden});
  return out;
}

#define SSTBERT_INSTANTIATE_ENCODER(T)                                                          \
  template Tensor<T> attention_block(const Tensor<T>&, const LayerParams<T>&,                   \
                                     std::span<const std::int32_t>, std::size_t,                \
                                     const ModelConfig&, const EncodeOptions&, Tensor<T>*);     \
  template EncoderOutput<T> encode_batch(std::span<const tokenizer::TokenSequence>,             \
                                         const EncoderParams<T>&, const ModelConfig&,           \
                                         const EncodeOptions&);                                 \
  template EncoderOutput<T> encode(const tokenizer::TokenSequence&, const EncoderParams<T>&,    \
                                   const ModelConfig&, bool, numerics::Rng*);

SSTBERT_INSTANTIATE_ENCODER(float)
SSTBERT_INSTANTIATE_ENCODER(double)

#undef SSTBERT_INSTANTIATE_ENCODER

}  // namespace sstbert::encoder
