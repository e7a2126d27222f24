#include "fednlp/models/trainer.hpp"

#include "fednlp/data/batching.hpp"
#include "fednlp/models/objectives.hpp"
#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/rng.hpp"

namespace fednlp::models {

namespace {

struct Accumulator {
  double weighted_loss = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;

  void add(const ObjectiveResult& r) {
    weighted_loss += r.loss.value()[0] * static_cast<double>(r.count);
    correct += r.correct;
    count += r.count;
  }

  Metrics finish() const {
    if (count == 0) return {};
    return {weighted_loss / static_cast<double>(count), static_cast<double>(correct) / static_cast<double>(count),
            count};
  }
};

ObjectiveResult run_objective(Task task, const ModelConfig& config, const BoundParameters& bound,
                              const data::TokenBatch& batch, const data::MaskingConfig& masking, Rng& mask_rng) {
  if (task == Task::mlm) {
    const auto masked = data::mask_batch(batch, config.vocab_size, masking, mask_rng);
    return mlm_objective(config, bound, masked);
  }
  return classification_objective(config, bound, batch);
}

void check_task(Task task, Head head) {
  if ((task == Task::mlm) != (head == Head::mlm)) throw UsageError("task does not match the model head");
}

}  // namespace

Metrics train_epoch(Model& model, AdamState& optimizer, std::span<const data::EncodedRecord> records,
                    const TrainOptions& options, std::uint64_t epoch) {
  check_task(options.task, model.head());
  data::BatchOptions batching;
  batching.batch_size = options.batch_size;
  batching.max_seq_len = model.config().max_seq_len;
  batching.seed = Rng::derive(options.batch_seed, {0x5EED, options.stream});
  batching.epoch = epoch;
  const auto batches = data::make_batches(records, batching);

  Accumulator acc;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    Rng mask_rng = Rng::stream(options.batch_seed, {0x3A5C, options.stream, epoch, i});
    Tape tape;
    BoundParameters bound(tape, model.parameters());
    ObjectiveResult r = run_objective(options.task, model.config(), bound, batches[i], options.masking, mask_rng);
    acc.add(r);
    if (r.count == 0) continue;
    tape.backward(r.loss);
    adam_step(model.parameters(), bound.gradients(), optimizer);
  }
  return acc.finish();
}

Metrics evaluate(const ModelConfig& config, Head head, const ParameterSet& params,
                 std::span<const data::EncodedRecord> records, const EvalOptions& options) {
  check_task(options.task, head);
  data::BatchOptions batching;
  batching.batch_size = options.batch_size;
  batching.max_seq_len = config.max_seq_len;
  batching.shuffle = false;
  const auto batches = data::make_batches(records, batching);

  Accumulator acc;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    Rng mask_rng = Rng::stream(options.mask_seed, {0xE7A1, i});
    Tape tape;
    BoundParameters bound(tape, params, false);
    acc.add(run_objective(options.task, config, bound, batches[i], options.masking, mask_rng));
  }
  return acc.finish();
}

}  // namespace fednlp::models
