#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fednlp::data {

enum class PartitionMode { balanced, imbalanced, small };

/// How records are split across clients.
///
/// `small` models the lower-bound scheme: a single client holding
/// min(ratios) of the data.
struct PartitionSpec {
  std::size_t n_clients = 8;
  PartitionMode mode = PartitionMode::imbalanced;
  std::vector<double> ratios = default_ratios();

  static std::vector<double> default_ratios() { return {0.29, 0.22, 0.17, 0.14, 0.09, 0.04, 0.03, 0.02}; }
  static PartitionSpec balanced(std::size_t n_clients);
  static PartitionSpec imbalanced(std::vector<double> ratios = default_ratios());
  static PartitionSpec small(std::vector<double> ratios = default_ratios());

  /// Number of shards `partition` produces.
  std::size_t shard_count() const { return mode == PartitionMode::small ? 1 : n_clients; }

  void validate() const;
};

/// Largest-remainder apportionment of `total` items by `ratios`; ties in the
/// fractional parts go to the lower index.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> ratios);

/// Shard sizes for `total` records under `spec`.
std::vector<std::size_t> partition_sizes(std::size_t total, const PartitionSpec& spec);

/// Shuffles [0, total) with `seed` and cuts it into contiguous shards.
std::vector<std::vector<std::size_t>> partition_indices(std::size_t total, const PartitionSpec& spec,
                                                        std::uint64_t seed);

template <typename T>
std::vector<std::vector<T>> partition(std::span<const T> records, const PartitionSpec& spec, std::uint64_t seed) {
  std::vector<std::vector<T>> shards;
  for (const auto& idx : partition_indices(records.size(), spec, seed)) {
    auto& shard = shards.emplace_back();
    shard.reserve(idx.size());
    for (std::size_t i : idx) shard.push_back(records[i]);
  }
  return shards;
}

/// Fisher-Yates permutation of [0, n) driven by the library RNG.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace fednlp::data
