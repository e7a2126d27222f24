#include "fednlp/tensor/adam.hpp"

#include <cmath>

#include "fednlp/tensor/errors.hpp"

namespace fednlp {

AdamState::AdamState(AdamOptions options) : options_(options) {
  if (!(options_.lr > 0.0)) throw ConfigError("Adam learning rate must be positive");
  if (!(options_.beta1 > 0.0 && options_.beta1 < 1.0) || !(options_.beta2 > 0.0 && options_.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in (0, 1)");
  }
  if (!(options_.eps > 0.0)) throw ConfigError("Adam eps must be positive");
}

void AdamState::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state) {
  if (!params.same_manifest(grads)) throw DimensionError("adam_step: gradients do not match parameter manifest");
  if (state.m_.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m_.emplace_back(params.tensor(i).shape(), 0.0);
      state.v_.emplace_back(params.tensor(i).shape(), 0.0);
    }
  } else {
    if (state.m_.size() != params.size()) throw DimensionError("adam_step: optimizer state tracks a different set");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (state.m_[i].shape() != params.tensor(i).shape()) {
        throw DimensionError("adam_step: moment shape " + shape_to_string(state.m_[i].shape()) +
                             " does not match parameter '" + params.name(i) + "' " +
                             shape_to_string(params.tensor(i).shape()));
      }
    }
  }
  state.t_ += 1;
  const AdamOptions& o = state.options_;
  const double t = static_cast<double>(state.t_);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* w = params.tensor(i).values().data();
    const double* g = grads.tensor(i).values().data();
    double* m = state.m_[i].values().data();
    double* v = state.v_[i].values().data();
    for (std::size_t j = 0, n = params.tensor(i).numel(); j < n; ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

}  // namespace fednlp
