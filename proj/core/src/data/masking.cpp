#include "fednlp/data/masking.hpp"

#include <cmath>

#include "fednlp/data/vocabulary.hpp"
#include "fednlp/tensor/errors.hpp"

namespace fednlp::data {

void MaskingConfig::validate() const {
  if (!(select_prob >= 0.0 && select_prob <= 1.0)) {
    throw ConfigError("masking select_prob must lie in [0, 1], got " + std::to_string(select_prob));
  }
  for (double f : {mask_frac, random_frac, keep_frac}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("masking fractions must lie in [0, 1]");
  }
  if (std::abs(mask_frac + random_frac + keep_frac - 1.0) > 1e-9) {
    throw ConfigError("masking fractions must sum to 1");
  }
  if (ignore_value >= 0) throw ConfigError("ignore sentinel must be negative so it never collides with a token id");
}

MaskedBatch mask_batch(const TokenBatch& batch, std::size_t vocab_size, const MaskingConfig& config, Rng& rng) {
  config.validate();
  MaskedBatch out;
  out.inputs = batch;
  out.labels.assign(batch.ids.size(), config.ignore_value);
  const bool can_randomize = vocab_size > kReservedCount;
  for (std::size_t i = 0; i < batch.ids.size(); ++i) {
    const std::int32_t original = batch.ids[i];
    if (original < kFirstTokenId || !batch.attention_mask[i]) continue;
    if (!rng.bernoulli(config.select_prob)) continue;
    out.labels[i] = original;
    const double u = rng.uniform();
    if (u < config.mask_frac) {
      out.inputs.ids[i] = kMaskId;
    } else if (u < config.mask_frac + config.random_frac && can_randomize) {
      out.inputs.ids[i] = static_cast<std::int32_t>(kReservedCount + rng.below(vocab_size - kReservedCount));
    }
  }
  return out;
}

}  // namespace fednlp::data
