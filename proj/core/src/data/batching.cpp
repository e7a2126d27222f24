#include "fednlp/data/batching.hpp"

#include <algorithm>
#include <numeric>

#include "fednlp/data/partition.hpp"
#include "fednlp/data/vocabulary.hpp"
#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/rng.hpp"

namespace fednlp::data {

std::vector<TokenBatch> make_batches(std::span<const EncodedRecord> records, const BatchOptions& options) {
  if (options.batch_size == 0) throw ConfigError("make_batches: batch_size must be at least 1");
  if (options.max_seq_len < 2) throw ConfigError("make_batches: max_seq_len must leave room for cls and a token");
  std::vector<std::size_t> order;
  if (options.shuffle) {
    order = shuffled_indices(records.size(), Rng::derive(options.seed, {0xBA7C, options.epoch}));
  } else {
    order.resize(records.size());
    std::iota(order.begin(), order.end(), 0);
  }

  std::vector<TokenBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
    const std::size_t count = std::min(options.batch_size, order.size() - start);
    TokenBatch batch;
    batch.batch_size = count;
    std::size_t longest = 1;
    for (std::size_t i = 0; i < count; ++i) {
      const auto& rec = records[order[start + i]];
      const std::size_t len = std::min(rec.ids.size() + 1, options.max_seq_len);
      batch.lengths.push_back(len);
      batch.labels.push_back(rec.label);
      longest = std::max(longest, len);
    }
    batch.seq_len = longest;
    batch.ids.assign(count * longest, kPadId);
    batch.attention_mask.assign(count * longest, 0);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& rec = records[order[start + i]];
      std::int32_t* row = batch.ids.data() + i * longest;
      row[0] = kClsId;
      std::copy_n(rec.ids.begin(), batch.lengths[i] - 1, row + 1);
      std::fill_n(batch.attention_mask.begin() + static_cast<std::ptrdiff_t>(i * longest), batch.lengths[i], 1);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace fednlp::data
