#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "fednlp/data/corpus.hpp"
#include "fednlp/data/masking.hpp"
#include "fednlp/models/model.hpp"
#include "fednlp/tensor/adam.hpp"

namespace fednlp::models {

enum class Task { mlm, classify };

struct Metrics {
  double loss = 0.0;
  double top1_accuracy = 0.0;
  std::size_t count = 0;  ///< scored targets (masked tokens or examples)

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Everything that determines the batches a training pass sees.
struct TrainOptions {
  Task task = Task::classify;
  std::size_t batch_size = 32;
  data::MaskingConfig masking{};
  std::uint64_t batch_seed = 0;
  /// Data-owner stream: client index, or 0 for a single pooled learner.
  std::uint64_t stream = 0;
};

struct EvalOptions {
  Task task = Task::classify;
  std::size_t batch_size = 64;
  data::MaskingConfig masking{};
  /// Evaluation masks depend only on this seed, so repeated evaluations of
  /// the same data score the same positions.
  std::uint64_t mask_seed = 0;
};

/// One pass over `records` with an Adam step per batch. `epoch` is the
/// owner's global epoch index and selects the shuffle and masking streams.
/// Returns the mean pre-update batch loss weighted by scored targets.
Metrics train_epoch(Model& model, AdamState& optimizer, std::span<const data::EncodedRecord> records,
                    const TrainOptions& options, std::uint64_t epoch);

/// Forward-only scoring in record order.
Metrics evaluate(const ModelConfig& config, Head head, const ParameterSet& params,
                 std::span<const data::EncodedRecord> records, const EvalOptions& options);

}  // namespace fednlp::models
