#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fednlp/data/batch.hpp"
#include "fednlp/models/config.hpp"
#include "fednlp/tensor/autodiff.hpp"
#include "fednlp/tensor/parameter_set.hpp"

namespace fednlp::models {

/// A configured model and its weights. Copying a Model copies its parameters;
/// each client owns a private instance.
class Model {
 public:
  /// Wraps existing weights; `params` must follow the config's manifest.
  Model(ModelConfig config, Head head, ParameterSet params);

  const ModelConfig& config() const { return config_; }
  Head head() const { return head_; }
  const ParameterSet& parameters() const { return params_; }
  ParameterSet& parameters() { return params_; }

  /// Replaces the weights; names and shapes must match the current manifest.
  void load(const ParameterSet& params);

  /// Copies encoder weights (embeddings and body) from `source`, which may
  /// carry a different head.
  void load_encoder(const ParameterSet& source);

 private:
  ModelConfig config_;
  Head head_;
  ParameterSet params_;
};

/// Deterministic initialization: matrices ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// embeddings ~ N(0, 0.02), biases 0, layer-norm gains 1. Each parameter draws
/// from its own RNG stream keyed by its manifest index.
Model init_model(const ModelConfig& config, Head head, std::uint64_t seed);

std::size_t parameter_count(const ModelConfig& config, Head head);

/// Transformer encoder. Returns hidden states of shape B x T x d_model.
/// When `attention_weights` is given it receives one B x H x T x T tensor per layer.
Var transformer_forward(const ModelConfig& config, const BoundParameters& params, const data::TokenBatch& batch,
                        std::vector<Tensor>* attention_weights = nullptr);

/// Untied vocabulary projection of every position: B x T x V.
Var mlm_logits(const ModelConfig& config, const BoundParameters& params, Var hidden);

/// Vocabulary projection of the selected flat positions (b * T + t) only.
Var mlm_logits_at(const ModelConfig& config, const BoundParameters& params, Var hidden,
                  std::span<const std::size_t> positions);

/// Mean-pools hidden states over each row's real tokens, then applies the
/// classification layer: B x n_classes.
Var classify_logits(const ModelConfig& config, const BoundParameters& params, Var hidden,
                    const data::TokenBatch& batch);

/// Stacked unidirectional LSTM; the top layer's hidden state at each row's
/// last real position feeds the classification layer: B x n_classes.
Var lstm_forward(const ModelConfig& config, const BoundParameters& params, const data::TokenBatch& batch);

}  // namespace fednlp::models
