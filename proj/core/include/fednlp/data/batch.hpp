#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fednlp::data {

/// Padded token matrix. Row b, column t lives at ids[b * seq_len + t].
struct TokenBatch {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<std::int32_t> ids;
  /// 1 on real tokens (including the leading cls), 0 on padding.
  std::vector<std::uint8_t> attention_mask;
  /// Real length of each row, cls included.
  std::vector<std::size_t> lengths;
  /// Class label per row; empty for unlabeled data.
  std::vector<std::int32_t> labels;
};

/// MLM training input: `inputs.ids` holds the corrupted tokens and `labels`
/// (same layout) holds the original id at selected positions and the ignore
/// sentinel everywhere else.
struct MaskedBatch {
  TokenBatch inputs;
  std::vector<std::int32_t> labels;
};

}  // namespace fednlp::data
