#include "fednlp/data/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/rng.hpp"

namespace fednlp::data {

PartitionSpec PartitionSpec::balanced(std::size_t n_clients) {
  PartitionSpec spec;
  spec.n_clients = n_clients;
  spec.mode = PartitionMode::balanced;
  spec.ratios.assign(n_clients, n_clients ? 1.0 / static_cast<double>(n_clients) : 0.0);
  return spec;
}

PartitionSpec PartitionSpec::imbalanced(std::vector<double> ratios) {
  PartitionSpec spec;
  spec.n_clients = ratios.size();
  spec.mode = PartitionMode::imbalanced;
  spec.ratios = std::move(ratios);
  return spec;
}

PartitionSpec PartitionSpec::small(std::vector<double> ratios) {
  PartitionSpec spec = imbalanced(std::move(ratios));
  spec.mode = PartitionMode::small;
  return spec;
}

void PartitionSpec::validate() const {
  if (n_clients == 0) throw ConfigError("partition needs at least one client");
  if (ratios.size() != n_clients) {
    throw ConfigError("partition has " + std::to_string(ratios.size()) + " ratios for " + std::to_string(n_clients) +
                      " clients");
  }
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw ConfigError("partition ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("partition ratios must sum to 1, got " + std::to_string(total));
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> ratios) {
  std::vector<std::size_t> sizes(ratios.size());
  std::vector<double> remainders(ratios.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double quota = ratios[i] * static_cast<double>(total);
    sizes[i] = static_cast<std::size_t>(std::floor(quota));
    remainders[i] = quota - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::vector<std::size_t> order(ratios.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++sizes[order[k]];
    ++assigned;
  }
  // Floating-point quotas can overshoot by one when ratios sum slightly above 1.
  for (std::size_t k = order.size(); assigned > total && k-- > 0;) {
    if (sizes[order[k]] > 0) {
      --sizes[order[k]];
      --assigned;
    }
  }
  return sizes;
}

std::vector<std::size_t> partition_sizes(std::size_t total, const PartitionSpec& spec) {
  spec.validate();
  if (total < spec.n_clients) {
    throw ConfigError("cannot split " + std::to_string(total) + " records across " + std::to_string(spec.n_clients) +
                      " clients");
  }
  switch (spec.mode) {
    case PartitionMode::balanced: {
      const std::vector<double> equal(spec.n_clients, 1.0 / static_cast<double>(spec.n_clients));
      return apportion(total, equal);
    }
    case PartitionMode::imbalanced:
      return apportion(total, spec.ratios);
    case PartitionMode::small: {
      const double smallest = *std::min_element(spec.ratios.begin(), spec.ratios.end());
      const std::vector<double> split{smallest, 1.0 - smallest};
      return {std::max<std::size_t>(1, apportion(total, split)[0])};
    }
  }
  return {};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::vector<std::vector<std::size_t>> partition_indices(std::size_t total, const PartitionSpec& spec,
                                                        std::uint64_t seed) {
  const auto sizes = partition_sizes(total, spec);
  const auto order = shuffled_indices(total, seed);
  std::vector<std::vector<std::size_t>> shards;
  std::size_t offset = 0;
  for (std::size_t size : sizes) {
    shards.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(offset),
                        order.begin() + static_cast<std::ptrdiff_t>(offset + size));
    offset += size;
  }
  return shards;
}

}  // namespace fednlp::data
