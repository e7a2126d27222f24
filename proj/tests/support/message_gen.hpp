#pragma once

#include <cstdint>
#include <vector>

#include "fednlp/fl/messages.hpp"
#include "fednlp/tensor/rng.hpp"

namespace fednlp::testing {

// Arbitrary well-formed message of any type; parameter values are
// f32-representable so decode(encode(m)) == m holds exactly.
fl::FlMessage random_message(Rng& rng);

ParameterSet random_f32_params(Rng& rng, std::size_t max_tensors = 4, std::size_t max_dim = 5);

// One of: bit flip, byte overwrite, insertion, deletion, truncation, or
// duplication of a span.
std::vector<std::uint8_t> mutate(std::vector<std::uint8_t> bytes, Rng& rng);

std::vector<std::uint8_t> random_bytes(Rng& rng, std::size_t max_len);

}  // namespace fednlp::testing
