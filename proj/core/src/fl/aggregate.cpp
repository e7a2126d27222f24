#include "fednlp/fl/aggregate.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "fednlp/tensor/errors.hpp"

namespace fednlp::fl {

AggregationRule parse_aggregation_rule(std::string_view text) {
  if (text == "weighted") return AggregationRule::weighted;
  if (text == "unweighted") return AggregationRule::unweighted;
  throw ConfigError("unknown aggregation rule '" + std::string(text) + "' (expected weighted or unweighted)");
}

std::string_view aggregation_rule_name(AggregationRule rule) {
  return rule == AggregationRule::weighted ? "weighted" : "unweighted";
}

ParameterSet federated_average(std::span<const ClientUpdate> updates, AggregationRule rule) {
  if (updates.empty()) throw UsageError("federated_average: no updates");
  std::vector<const ClientUpdate*> order;
  for (const auto& u : updates) {
    if (u.params == nullptr) throw UsageError("federated_average: null parameter set");
    order.push_back(&u);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

  const ParameterSet& anchor = *order.front()->params;
  for (const auto* u : order) {
    if (!u->params->same_manifest(anchor)) {
      throw DimensionError("federated_average: client " + std::to_string(u->client_id) + " has a different manifest");
    }
  }

  std::vector<double> weights;
  double total = 0.0;
  for (const auto* u : order) {
    double n = rule == AggregationRule::weighted ? static_cast<double>(u->n_samples) : 1.0;
    weights.push_back(n);
    total += n;
  }
  if (total <= 0.0) throw UsageError("federated_average: total sample count is zero");
  for (double& w : weights) w /= total;

  ParameterSet out = anchor;
  for (std::size_t p = 0; p < out.size(); ++p) {
    auto dst = out.tensor(p).values();
    auto base = anchor.tensor(p).values();
    for (std::size_t i = 1; i < order.size(); ++i) {
      auto src = order[i]->params->tensor(p).values();
      double w = weights[i];
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * (src[k] - base[k]);
    }
  }
  return out;
}

}  // namespace fednlp::fl
