#include "fednlp/experiment/dataset.hpp"

#include <cmath>

#include "fednlp/data/partition.hpp"
#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/rng.hpp"

namespace fednlp::experiment {

std::vector<data::EncodedRecord> PreparedData::pooled_train() const {
  std::vector<data::EncodedRecord> out;
  for (const auto& s : shards) out.insert(out.end(), s.train.begin(), s.train.end());
  return out;
}

std::vector<data::Record> load_records(const ExperimentConfig& config) {
  if (!config.data.corpus_path.empty()) return data::read_corpus(config.data.corpus_path);
  return data::generate_corpus(config.seeds.corpus, config.data.n_patients, config.data.grammar());
}

PreparedData prepare_data(const ExperimentConfig& config) {
  const auto records = load_records(config);
  PreparedData out;
  out.corpus_size = records.size();
  out.vocab = data::Vocabulary::build(data::corpus_lines(records), config.vocab_size);
  const auto encoded = data::encode_records(records, out.vocab);

  const auto order = data::shuffled_indices(encoded.size(), Rng::derive(config.seeds.partition, {0x7A11}));
  auto n_val = static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(encoded.size())));
  if (config.validation_fraction > 0.0) n_val = std::max<std::size_t>(n_val, 1);
  if (n_val >= encoded.size()) throw ConfigError("validation split leaves no training data");

  std::vector<data::EncodedRecord> rest;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? out.validation : rest).push_back(encoded[order[i]]);
  }
  for (auto& part : data::partition<data::EncodedRecord>(rest, config.partition, config.seeds.partition)) {
    Shard shard;
    auto n_hold = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(part.size())));
    if (n_hold >= part.size()) n_hold = part.size() - 1;
    shard.train.assign(part.begin(), part.end() - static_cast<std::ptrdiff_t>(n_hold));
    shard.holdout.assign(part.end() - static_cast<std::ptrdiff_t>(n_hold), part.end());
    out.shards.push_back(std::move(shard));
  }
  return out;
}

}  // namespace fednlp::experiment
