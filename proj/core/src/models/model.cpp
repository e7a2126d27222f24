#include "fednlp/models/model.hpp"

#include <cmath>

#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/rng.hpp"

namespace fednlp::models {

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void check_manifest(const ModelConfig& config, Head head, const ParameterSet& params) {
  const auto layout = parameter_layout(config, head);
  if (layout.size() != params.size()) {
    throw UsageError("parameter set has " + std::to_string(params.size()) + " tensors, model expects " +
                     std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params.name(i) != layout[i].first || params.tensor(i).shape() != layout[i].second) {
      throw UsageError("parameter " + std::to_string(i) + " is '" + params.name(i) + "' " +
                       shape_to_string(params.tensor(i).shape()) + ", expected '" + layout[i].first + "' " +
                       shape_to_string(layout[i].second));
    }
  }
}

}  // namespace

Model::Model(ModelConfig config, Head head, ParameterSet params)
    : config_(config), head_(head), params_(std::move(params)) {
  check_manifest(config_, head_, params_);
}

void Model::load(const ParameterSet& params) {
  if (!params_.same_manifest(params)) throw UsageError("load: parameter manifest mismatch");
  params_ = params;
}

void Model::load_encoder(const ParameterSet& source) {
  for (const auto& prefix : encoder_prefixes(config_)) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const std::string& name = params_.name(i);
      if (name.rfind(prefix, 0) != 0) continue;
      const Tensor& src = source.at(name);
      if (src.shape() != params_.tensor(i).shape()) throw UsageError("load_encoder: shape mismatch for " + name);
      params_.tensor(i) = src;
    }
  }
}

Model init_model(const ModelConfig& config, Head head, std::uint64_t seed) {
  ParameterSet params;
  const auto layout = parameter_layout(config, head);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, shape] = layout[i];
    Tensor t(shape, 0.0);
    Rng rng = Rng::stream(seed, {0x1417, i});
    if (name.rfind("emb.", 0) == 0) {
      for (double& v : t.values()) v = rng.normal(0.0, 0.02);
    } else if (ends_with(name, ".gain")) {
      t.fill(1.0);
    } else if (shape.size() == 2) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape[0]));
      for (double& v : t.values()) v = rng.uniform(-bound, bound);
    }
    params.add(name, std::move(t));
  }
  return Model(config, head, std::move(params));
}

std::size_t parameter_count(const ModelConfig& config, Head head) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_layout(config, head)) n += shape_numel(shape);
  return n;
}

}  // namespace fednlp::models
