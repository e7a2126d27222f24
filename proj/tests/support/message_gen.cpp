#include "message_gen.hpp"

#include <cmath>
#include <string>

namespace fednlp::testing {

namespace {

std::string random_string(Rng& rng, std::size_t max_len) {
  std::string s(rng.below(max_len + 1), '\0');
  for (auto& c : s) c = static_cast<char>(rng.below(256));
  return s;
}

double random_double(Rng& rng) {
  switch (rng.below(4)) {
    case 0: return 0.0;
    case 1: return -0.0;
    case 2: return rng.uniform(-1e6, 1e6);
    default: return std::ldexp(rng.uniform(0.5, 1.0), static_cast<int>(rng.below(200)) - 100);
  }
}

}  // namespace

ParameterSet random_f32_params(Rng& rng, std::size_t max_tensors, std::size_t max_dim) {
  ParameterSet p;
  const std::size_t n = rng.below(max_tensors + 1);
  for (std::size_t i = 0; i < n; ++i) {
    Shape shape(1 + rng.below(3));
    for (auto& d : shape) d = 1 + rng.below(max_dim);
    Tensor t(shape);
    for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-10.0, 10.0));
    p.add("p" + std::to_string(i) + "." + random_string(rng, 3), std::move(t));
  }
  return p;
}

fl::FlMessage random_message(Rng& rng) {
  switch (rng.below(7)) {
    case 0: return fl::Hello{random_string(rng, 12), random_string(rng, 20)};
    case 1:
      return fl::Provisioned{static_cast<std::uint32_t>(rng.next_u64()), rng.next_u64(),
                             {static_cast<std::uint32_t>(rng.below(100)), static_cast<std::uint32_t>(rng.below(5))}};
    case 2: {
      fl::GlobalModel m;
      m.round = static_cast<std::uint32_t>(rng.below(1000));
      m.params = random_f32_params(rng);
      m.directive = {static_cast<std::uint32_t>(rng.below(5)), random_double(rng), rng.bernoulli(0.5)};
      m.session_tag = rng.next_u64();
      return m;
    }
    case 3: {
      fl::LocalUpdate m;
      m.client_id = static_cast<std::uint32_t>(rng.below(16));
      m.round = static_cast<std::uint32_t>(rng.below(1000));
      m.params = random_f32_params(rng);
      m.n_samples = rng.next_u64();
      m.local_metrics = {random_double(rng), random_double(rng), random_double(rng), random_double(rng)};
      m.session_tag = rng.next_u64();
      return m;
    }
    case 4:
      return fl::RoundComplete{static_cast<std::uint32_t>(rng.below(1000)),
                               {random_double(rng), random_double(rng), random_double(rng), random_double(rng)},
                               rng.next_u64()};
    case 5: return fl::Shutdown{random_string(rng, 40)};
    default:
      return fl::Error{static_cast<fl::ErrorCode>(1 + rng.below(8)), random_string(rng, 40)};
  }
}

std::vector<std::uint8_t> mutate(std::vector<std::uint8_t> bytes, Rng& rng) {
  if (bytes.empty()) return bytes;
  const std::size_t at = rng.below(bytes.size());
  switch (rng.below(6)) {
    case 0: bytes[at] ^= static_cast<std::uint8_t>(1u << rng.below(8)); break;
    case 1: bytes[at] = static_cast<std::uint8_t>(rng.below(256)); break;
    case 2: bytes.insert(bytes.begin() + static_cast<std::ptrdiff_t>(at), static_cast<std::uint8_t>(rng.below(256))); break;
    case 3: bytes.erase(bytes.begin() + static_cast<std::ptrdiff_t>(at)); break;
    case 4: bytes.resize(at); break;
    default: {
      const std::size_t len = 1 + rng.below(bytes.size() - at);
      std::vector<std::uint8_t> span(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                                     bytes.begin() + static_cast<std::ptrdiff_t>(at + len));
      bytes.insert(bytes.begin() + static_cast<std::ptrdiff_t>(at), span.begin(), span.end());
    }
  }
  return bytes;
}

std::vector<std::uint8_t> random_bytes(Rng& rng, std::size_t max_len) {
  std::vector<std::uint8_t> out(rng.below(max_len + 1));
  for (auto& b : out) b = static_cast<std::uint8_t>(rng.below(256));
  return out;
}

}  // namespace fednlp::testing
