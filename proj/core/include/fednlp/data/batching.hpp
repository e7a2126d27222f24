#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fednlp/data/batch.hpp"
#include "fednlp/data/corpus.hpp"

namespace fednlp::data {

struct BatchOptions {
  std::size_t batch_size = 32;
  /// Upper bound on padded length, cls included.
  std::size_t max_seq_len = 64;
  /// Record order is shuffled with a stream derived from (seed, epoch);
  /// with `shuffle == false` records keep their input order.
  bool shuffle = true;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

/// Splits `records` into padded batches: cls is prepended, each record is
/// truncated to max_seq_len, and every batch is padded to its longest row.
/// The last batch holds the remainder.
std::vector<TokenBatch> make_batches(std::span<const EncodedRecord> records, const BatchOptions& options);

}  // namespace fednlp::data
