#pragma once

#include <cstddef>
#include <vector>

#include "fednlp/data/corpus.hpp"
#include "fednlp/data/vocabulary.hpp"
#include "fednlp/experiment/config.hpp"

namespace fednlp::experiment {

struct Shard {
  std::vector<data::EncodedRecord> train;
  std::vector<data::EncodedRecord> holdout;  ///< client-side validation slice
};

/// Corpus, vocabulary and splits for one experiment. Depends only on the
/// data source, vocab_size, fractions, partition and seeds.corpus /
/// seeds.partition.
struct PreparedData {
  data::Vocabulary vocab;
  std::size_t corpus_size = 0;
  /// Server-held validation set, carved off before partitioning.
  std::vector<data::EncodedRecord> validation;
  std::vector<Shard> shards;

  /// Concatenation of every shard's train slice, in shard order.
  std::vector<data::EncodedRecord> pooled_train() const;
};

/// Loads or generates the corpus, builds the vocabulary, takes the global
/// validation split, partitions the remainder and cuts each shard's holdout
/// (the last floor(holdout_fraction * n) records of the shard).
PreparedData prepare_data(const ExperimentConfig& config);

/// The raw records prepare_data starts from.
std::vector<data::Record> load_records(const ExperimentConfig& config);

}  // namespace fednlp::experiment
