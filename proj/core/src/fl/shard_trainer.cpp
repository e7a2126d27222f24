#include "fednlp/fl/shard_trainer.hpp"

#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/rng.hpp"

namespace fednlp::fl {

ShardTrainer::ShardTrainer(LearnerOptions options, std::vector<data::EncodedRecord> train,
                           std::vector<data::EncodedRecord> holdout)
    : options_(std::move(options)), train_(std::move(train)), holdout_(std::move(holdout)) {
  options_.config.validate();
  if (train_.empty()) throw UsageError("shard trainer: empty training shard");
}

bool ShardTrainer::accepts(const ParameterSet& global) const {
  auto layout = models::parameter_layout(options_.config, options_.head);
  if (layout.size() != global.size()) return false;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != global.name(i) || layout[i].second != global.tensor(i).shape()) return false;
  }
  return true;
}

LocalResult ShardTrainer::train(const ParameterSet& global, const TrainDirective& directive, std::uint32_t round) {
  if (!accepts(global)) throw UsageError("shard trainer: parameter manifest mismatch");
  if (round == 0) throw UsageError("shard trainer: rounds start at 1");
  models::Model model(options_.config, options_.head, global);

  AdamOptions adam = options_.adam;
  adam.lr = directive.lr;
  if (directive.reset_optimizer || !adam_ || adam_->options().lr != adam.lr) adam_.emplace(adam);

  models::TrainOptions opts;
  opts.task = options_.task();
  opts.batch_size = options_.batch_size;
  opts.masking = options_.masking;
  opts.batch_seed = options_.seed;
  opts.stream = options_.stream;

  LocalResult result;
  std::uint64_t first_epoch = std::uint64_t{round - 1} * directive.local_epochs;
  models::Metrics last;
  for (std::uint32_t e = 0; e < directive.local_epochs; ++e) {
    last = models::train_epoch(model, *adam_, train_, opts, first_epoch + e);
  }
  models::Metrics val = evaluate_holdout(model.parameters());
  result.params = std::move(model.parameters());
  result.n_samples = train_.size();
  result.metrics = LocalMetrics{last.loss, last.top1_accuracy, val.loss, val.top1_accuracy};
  return result;
}

models::Metrics ShardTrainer::evaluate_holdout(const ParameterSet& params) const {
  if (holdout_.empty()) return {};
  models::EvalOptions eval;
  eval.task = options_.task();
  eval.batch_size = options_.eval_batch_size;
  eval.masking = options_.masking;
  eval.mask_seed = Rng::derive(options_.seed, {0x401D, options_.stream});
  return models::evaluate(options_.config, options_.head, params, holdout_, eval);
}

}  // namespace fednlp::fl
