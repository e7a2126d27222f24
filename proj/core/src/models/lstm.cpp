#include <string>

#include "fednlp/models/model.hpp"
#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/ops.hpp"

namespace fednlp::models {

// Gate layout along the 4*d columns: input, forget, cell candidate, output.
Var lstm_forward(const ModelConfig& config, const BoundParameters& p, const data::TokenBatch& batch) {
  if (config.kind != ModelKind::lstm) throw UsageError("lstm_forward: model is not an LSTM");
  const std::size_t B = batch.batch_size, T = batch.seq_len, d = config.d_model;
  if (B == 0 || T == 0) throw UsageError("lstm_forward: empty sequence batch");
  for (std::size_t len : batch.lengths) {
    if (len == 0 || len > T) throw UsageError("lstm_forward: empty or overlong sequence in batch");
  }
  Tape& tape = p.at(0).tape();

  // Time-major token order: row t * B + b.
  std::vector<std::int32_t> ids(B * T);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) ids[t * B + b] = batch.ids[b * T + t];
  }
  Var input = embedding_lookup(p["emb.tok"], ids, Shape{T * B});

  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string pre = "lstm." + std::to_string(l) + ".";
    Var projected = add(matmul(input, p[pre + "wx"]), p[pre + "b"]);
    Var wh = p[pre + "wh"];
    Var h = tape.constant(Tensor(Shape{B, d}, 0.0));
    Var c = tape.constant(Tensor(Shape{B, d}, 0.0));
    std::vector<Var> outputs;
    outputs.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      Var gates = add(slice_rows(projected, t * B, (t + 1) * B), matmul(h, wh));
      Var in_gate = sigmoid(slice_cols(gates, 0, d));
      Var forget_gate = sigmoid(slice_cols(gates, d, 2 * d));
      Var candidate = tanh(slice_cols(gates, 2 * d, 3 * d));
      Var out_gate = sigmoid(slice_cols(gates, 3 * d, 4 * d));
      c = add(mul(forget_gate, c), mul(in_gate, candidate));
      h = mul(out_gate, tanh(c));
      outputs.push_back(h);
    }
    input = concat_rows(outputs);
  }

  std::vector<std::size_t> last(B);
  for (std::size_t b = 0; b < B; ++b) last[b] = (batch.lengths[b] - 1) * B + b;
  Var final_state = gather_rows(input, last);
  return add(matmul(final_state, p["cls.w"]), p["cls.b"]);
}

}  // namespace fednlp::models
