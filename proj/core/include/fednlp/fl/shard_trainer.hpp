#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fednlp/data/corpus.hpp"
#include "fednlp/fl/client.hpp"
#include "fednlp/models/trainer.hpp"

namespace fednlp::fl {

struct LearnerOptions {
  models::ModelConfig config;
  models::Head head = models::Head::classify;
  std::size_t batch_size = 32;
  std::size_t eval_batch_size = 64;
  data::MaskingConfig masking{};
  std::uint64_t seed = 0;
  /// Batch/masking stream of this data owner.
  std::uint64_t stream = 0;
  AdamOptions adam{};

  models::Task task() const { return head == models::Head::mlm ? models::Task::mlm : models::Task::classify; }
};

/// Trains a private model copy on one data shard and scores it on the
/// shard's held-out slice. Used for federated clients and, with the pooled
/// data, for the centralized and standalone baselines.
class ShardTrainer final : public LocalTrainer {
 public:
  ShardTrainer(LearnerOptions options, std::vector<data::EncodedRecord> train,
               std::vector<data::EncodedRecord> holdout);

  bool accepts(const ParameterSet& global) const override;

  /// Loads `global`, runs `directive.local_epochs` epochs (global epoch index
  /// (round - 1) * local_epochs + e) and evaluates on the hold-out slice.
  LocalResult train(const ParameterSet& global, const TrainDirective& directive, std::uint32_t round) override;

  models::Metrics evaluate_holdout(const ParameterSet& params) const;

  const LearnerOptions& options() const { return options_; }
  std::size_t train_size() const { return train_.size(); }
  std::size_t holdout_size() const { return holdout_.size(); }
  /// Adam steps taken since the optimizer was last reset.
  std::uint64_t optimizer_steps() const { return adam_ ? adam_->step_count() : 0; }

 private:
  LearnerOptions options_;
  std::vector<data::EncodedRecord> train_;
  std::vector<data::EncodedRecord> holdout_;
  std::optional<AdamState> adam_;
};

}  // namespace fednlp::fl
