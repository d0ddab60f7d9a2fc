#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sstbert/numerics/rng.hpp"
#include "sstbert/numerics/tensor.hpp"

// Differentiable primitives. Every op records itself on the active tape when
// at least one input requires a gradient; otherwise it is a plain forward
// computation. Reductions accumulate in double regardless of T.
namespace sstbert::numerics {

/// [m x k] . [k x n] -> [m x n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// [m x n] -> [n x m]
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

/// Elementwise a + b; shapes must match.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// x[m x n] + row[n] broadcast over rows (biases, additive attention masks).
template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& row);

/// Elementwise product; shapes must match.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, double factor);

/// Sum of all elements -> [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// Single element x[flat_index] -> [1].
template <typename T>
Tensor<T> pick(const Tensor<T>& x, std::size_t flat_index);

/// Softmax over the last axis, max-subtracted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& z);

/// Per-row normalisation over the last axis, then gain/bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     double eps = 1e-12);

/// tanh-approximated GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> tanh(const Tensor<T>& x);

/// Row gather: out[i] = table[ids[i]]. Gradients scatter-add into the table.
template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, std::span<const std::int32_t> ids);

/// Inverted dropout. Identity when !training or p == 0; otherwise each element
/// is zeroed with probability p and survivors are scaled by 1/(1-p).
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng* rng);

/// -mean_i log probs[i, labels[i]] -> [1].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& probs, std::span<const std::int32_t> labels);

/// cross_entropy(softmax(logits), labels) computed in one stable pass.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels);

/// Columns [begin, begin+count) of a matrix.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t count);

/// Horizontal concatenation of matrices with equal row counts.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);

/// Rows [begin, begin+count) of a matrix.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t count);

/// Same values, new shape of equal size.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Multi-head scaled dot-product attention over `batch` sequences stacked
/// row-wise, seq_len = rows / batch. q, k, v: [batch*seq_len x H], H split
/// evenly into `heads`. key_mask holds one entry per row; a 0 adds -1e9 to
/// that key's logits. Attention probabilities get inverted dropout when
/// training. probs_out, when given, receives the pre-dropout probabilities
/// as [batch*heads*seq_len x seq_len] (not differentiable).
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               std::size_t batch, std::size_t heads,
                               std::span<const std::int32_t> key_mask, double dropout_p,
                               bool training, Rng* rng, Tensor<T>* probs_out = nullptr);

}  // namespace sstbert::numerics
