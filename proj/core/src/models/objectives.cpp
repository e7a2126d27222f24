#include "fednlp/models/objectives.hpp"

#include "fednlp/data/masking.hpp"
#include "fednlp/models/model.hpp"
#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/ops.hpp"

namespace fednlp::models {

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  auto r = logits.row(row);
  std::size_t best = 0;
  for (std::size_t c = 1; c < r.size(); ++c) {
    if (r[c] > r[best]) best = c;
  }
  return best;
}

ObjectiveResult mlm_objective(const ModelConfig& config, const BoundParameters& params,
                              const data::MaskedBatch& batch) {
  std::vector<std::size_t> positions;
  std::vector<std::int32_t> targets;
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    if (batch.labels[i] < 0) continue;
    positions.push_back(i);
    targets.push_back(batch.labels[i]);
  }
  ObjectiveResult result;
  if (positions.empty()) {
    result.loss = params.at(0).tape().constant(Tensor::scalar(0.0));
    return result;
  }
  Var hidden = transformer_forward(config, params, batch.inputs);
  Var logits = mlm_logits_at(config, params, hidden, positions);
  result.loss = masked_cross_entropy(logits, targets, data::kIgnoreLabel);
  result.count = positions.size();
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (argmax_row(logits.value(), i) == static_cast<std::size_t>(targets[i])) ++result.correct;
  }
  return result;
}

ObjectiveResult classification_objective(const ModelConfig& config, const BoundParameters& params,
                                         const data::TokenBatch& batch) {
  if (batch.labels.size() != batch.batch_size) throw UsageError("classification batch lacks labels");
  Var logits = config.kind == ModelKind::lstm
                   ? lstm_forward(config, params, batch)
                   : classify_logits(config, params, transformer_forward(config, params, batch), batch);
  ObjectiveResult result;
  result.loss = masked_cross_entropy(logits, batch.labels, data::kIgnoreLabel);
  result.count = batch.batch_size;
  for (std::size_t b = 0; b < batch.batch_size; ++b) {
    if (argmax_row(logits.value(), b) == static_cast<std::size_t>(batch.labels[b])) ++result.correct;
  }
  return result;
}

}  // namespace fednlp::models
