#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "fednlp/tensor/parameter_set.hpp"

namespace fednlp::fl {

enum class AggregationRule { weighted, unweighted };

AggregationRule parse_aggregation_rule(std::string_view text);
std::string_view aggregation_rule_name(AggregationRule rule);

struct ClientUpdate {
  std::uint32_t client_id = 0;
  std::uint64_t n_samples = 0;
  const ParameterSet* params = nullptr;
};

/// Federated averaging: per element, sum_i (n_i / N) w_i, or the plain mean
/// for AggregationRule::unweighted. Updates are ordered by client_id and
/// combined as w_0 + sum_i (n_i / N)(w_i - w_0), so one update, or k
/// identical ones, is returned bit-for-bit.
///
/// Throws UsageError for no updates or N == 0, DimensionError when the
/// manifests differ.
ParameterSet federated_average(std::span<const ClientUpdate> updates, AggregationRule rule = AggregationRule::weighted);

}  // namespace fednlp::fl
