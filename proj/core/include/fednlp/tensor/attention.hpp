#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "fednlp/tensor/autodiff.hpp"

namespace fednlp {

struct AttentionShape {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::size_t n_heads = 0;
  std::size_t head_dim = 0;
};

struct AttentionOutput {
  /// (batch*seq_len) x (n_heads*head_dim), heads concatenated along columns.
  Var context;
  /// batch x n_heads x seq_len(query) x seq_len(key) softmax weights.
  Tensor weights;
};

/// Scaled dot-product self-attention for every (sequence, head) pair.
///
/// `q`, `k` and `v` are (batch*seq_len) x (n_heads*head_dim) with row
/// b*seq_len+t holding position t of sequence b; head h occupies columns
/// [h*head_dim, (h+1)*head_dim). `key_mask` (batch*seq_len, 1 = real token)
/// excludes padded keys: they receive exactly zero weight. Attention is
/// bidirectional; only padding is masked.
AttentionOutput multi_head_attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_mask,
                                     const AttentionShape& shape);

}  // namespace fednlp
