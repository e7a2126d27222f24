#pragma once

#include <cstddef>

#include "fednlp/data/batch.hpp"
#include "fednlp/models/config.hpp"
#include "fednlp/tensor/autodiff.hpp"

namespace fednlp::models {

struct ObjectiveResult {
  Var loss;                 ///< scalar mean loss over counted targets
  std::size_t correct = 0;  ///< top-1 hits (ties resolve to the lower index)
  std::size_t count = 0;    ///< masked positions or examples scored
};

/// Masked-token cross-entropy. Logits are computed only at selected
/// positions, which gives the same loss and gradients as projecting every
/// position and ignoring the rest.
ObjectiveResult mlm_objective(const ModelConfig& config, const BoundParameters& params,
                              const data::MaskedBatch& batch);

/// Sequence classification cross-entropy against `batch.labels`.
ObjectiveResult classification_objective(const ModelConfig& config, const BoundParameters& params,
                                         const data::TokenBatch& batch);

/// Index of the row maximum; the first maximum wins ties.
std::size_t argmax_row(const Tensor& logits, std::size_t row);

}  // namespace fednlp::models
