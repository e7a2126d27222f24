#include <string>

#include "fednlp/models/model.hpp"
#include "fednlp/tensor/attention.hpp"
#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/ops.hpp"

namespace fednlp::models {

namespace {

Var affine(Var x, Var w, Var b) { return add(matmul(x, w), b); }

}  // namespace

Var transformer_forward(const ModelConfig& config, const BoundParameters& p, const data::TokenBatch& batch,
                        std::vector<Tensor>* attention_weights) {
  if (config.kind != ModelKind::transformer) throw UsageError("transformer_forward: model is not a transformer");
  const std::size_t B = batch.batch_size, T = batch.seq_len, d = config.d_model;
  if (B == 0 || T == 0) throw UsageError("transformer_forward: empty batch");
  if (T > config.max_seq_len) {
    throw UsageError("transformer_forward: sequence length " + std::to_string(T) + " exceeds max_seq_len " +
                     std::to_string(config.max_seq_len));
  }
  std::vector<std::int32_t> positions(B * T);
  for (std::size_t i = 0; i < B * T; ++i) positions[i] = static_cast<std::int32_t>(i % T);
  Var x = add(embedding_lookup(p["emb.tok"], batch.ids, Shape{B * T}),
              embedding_lookup(p["emb.pos"], positions, Shape{B * T}));

  const AttentionShape shape{B, T, config.n_heads, config.head_dim()};
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string pre = "enc." + std::to_string(l) + ".";
    Var q = affine(x, p[pre + "attn.wq"], p[pre + "attn.bq"]);
    Var k = affine(x, p[pre + "attn.wk"], p[pre + "attn.bk"]);
    Var v = affine(x, p[pre + "attn.wv"], p[pre + "attn.bv"]);
    AttentionOutput att = multi_head_attention(q, k, v, batch.attention_mask, shape);
    if (attention_weights) attention_weights->push_back(std::move(att.weights));
    Var projected = affine(att.context, p[pre + "attn.wo"], p[pre + "attn.bo"]);
    x = layer_norm(add(x, projected), p[pre + "ln1.gain"], p[pre + "ln1.bias"]);
    Var inner = gelu(affine(x, p[pre + "ffn.w1"], p[pre + "ffn.b1"]));
    Var ffn = affine(inner, p[pre + "ffn.w2"], p[pre + "ffn.b2"]);
    x = layer_norm(add(x, ffn), p[pre + "ln2.gain"], p[pre + "ln2.bias"]);
  }
  return reshape(x, Shape{B, T, d});
}

Var mlm_logits(const ModelConfig& config, const BoundParameters& p, Var hidden) {
  (void)config;
  return affine(hidden, p["mlm.w"], p["mlm.b"]);
}

Var mlm_logits_at(const ModelConfig& config, const BoundParameters& p, Var hidden,
                  std::span<const std::size_t> positions) {
  (void)config;
  return affine(gather_rows(hidden, positions), p["mlm.w"], p["mlm.b"]);
}

Var classify_logits(const ModelConfig& config, const BoundParameters& p, Var hidden, const data::TokenBatch& batch) {
  const std::size_t B = batch.batch_size, T = batch.seq_len, d = config.d_model;
  Tensor pool(Shape{B, B * T}, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t real = 0;
    for (std::size_t t = 0; t < T; ++t) real += batch.attention_mask[b * T + t];
    if (real == 0) throw UsageError("classify_logits: row " + std::to_string(b) + " has no real tokens");
    for (std::size_t t = 0; t < T; ++t) {
      if (batch.attention_mask[b * T + t]) pool.at(b, b * T + t) = 1.0 / static_cast<double>(real);
    }
  }
  Tape& tape = hidden.tape();
  Var pooled = matmul(tape.constant(std::move(pool)), reshape(hidden, Shape{B * T, d}));
  return affine(pooled, p["cls.w"], p["cls.b"]);
}

}  // namespace fednlp::models
