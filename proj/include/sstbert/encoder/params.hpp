#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "sstbert/encoder/config.hpp"
#include "sstbert/numerics/rng.hpp"
#include "sstbert/numerics/tensor.hpp"
#include "sstbert/numerics/tensor_io.hpp"

namespace sstbert::encoder {

using numerics::NamedTensor;
using numerics::Tensor;

class ParamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weights are stored [in x out] so a layer is x . w + b.
template <typename T>
struct LayerParams {
  Tensor<T> q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
  Tensor<T> ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
  Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
};

template <typename T>
struct EncoderParams {
  Tensor<T> tok, pos, seg;
  Tensor<T> emb_ln_g, emb_ln_b;
  std::vector<LayerParams<T>> layers;
  Tensor<T> pooler_w, pooler_b;

  /// Checkpoint names (`emb.tok`, `layer.<i>.attn.q.w`, ...) paired with
  /// handles sharing this struct's storage.
  std::vector<NamedTensor<T>> named() const;
  void set_requires_grad(bool on);
};

/// Truncated normal (sigma 0.02, cut at 2 sigma) weights and embeddings,
/// zero biases, unit layer-norm gains.
EncoderParams<float> init_params(const ModelConfig& config, numerics::Rng& rng);

/// Deep copy with values converted.
template <typename To, typename From>
EncoderParams<To> cast_params(const EncoderParams<From>& params);

/// Deep copy.
template <typename T>
EncoderParams<T> clone_params(const EncoderParams<T>& params);

/// Builds params from a named table. Throws ParamError when a tensor is
/// missing, has the wrong shape, or holds a non-finite value.
EncoderParams<float> params_from_table(const numerics::TensorTable& table,
                                       const ModelConfig& config);

/// Throws ParamError unless every tensor matches config and is finite.
void validate_params(const EncoderParams<float>& params, const ModelConfig& config);

}  // namespace sstbert::encoder
