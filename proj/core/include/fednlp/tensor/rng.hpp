#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace fednlp {

/// xoshiro256** generator seeded through splitmix64.
///
/// Every random draw in the library goes through this type so that runs
/// replay exactly on any platform: the standard <random> distributions are
/// implementation-defined and are never used. Independent streams (one per
/// client, per epoch, per batch) are obtained with `Rng::stream`, which hashes
/// a root seed together with a list of stream tags.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Generator for the stream identified by `tags` under `seed`.
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

  /// Derives a child seed without constructing a generator.
  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via Box-Muller (the spare value is cached).
  double normal();
  double normal(double mean, double stddev);

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace fednlp
