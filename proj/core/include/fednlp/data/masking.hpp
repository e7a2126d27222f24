#pragma once

#include <cstddef>
#include <cstdint>

#include "fednlp/data/batch.hpp"
#include "fednlp/tensor/rng.hpp"

namespace fednlp::data {

inline constexpr std::int32_t kIgnoreLabel = -1;

/// Masked-language-model corruption policy.
///
/// Each eligible position is selected independently with `select_prob`.
/// A selected position is replaced by the mask token (`mask_frac`), by a
/// uniformly random regular token (`random_frac`), or left unchanged
/// (`keep_frac`); all selected positions carry their original id as the label.
struct MaskingConfig {
  double select_prob = 0.15;
  double mask_frac = 0.8;
  double random_frac = 0.1;
  double keep_frac = 0.1;
  std::int32_t ignore_value = kIgnoreLabel;

  /// 80/10/10 split.
  static MaskingConfig standard() { return {}; }
  /// 90/0/10: no random replacement.
  static MaskingConfig without_random() { return {0.15, 0.9, 0.0, 0.1, kIgnoreLabel}; }

  void validate() const;
};

/// Applies MLM corruption to a batch. Only regular tokens (id >= 4) are
/// eligible, so pad and cls are never selected. Random replacements are drawn
/// from [4, vocab_size).
MaskedBatch mask_batch(const TokenBatch& batch, std::size_t vocab_size, const MaskingConfig& config, Rng& rng);

}  // namespace fednlp::data
