#pragma once

#include <cstdint>
#include <vector>

#include "fednlp/tensor/parameter_set.hpp"

namespace fednlp {

struct AdamOptions {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for one ParameterSet. Moments are created as zeros on the
/// first step and must keep matching the parameters' shapes afterwards.
class AdamState {
 public:
  explicit AdamState(AdamOptions options = {});

  const AdamOptions& options() const { return options_; }
  std::uint64_t step_count() const { return t_; }

  /// Drops the moments and the step counter.
  void reset();

  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  friend void adam_step(ParameterSet&, const ParameterSet&, AdamState&);

  AdamOptions options_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state);

}  // namespace fednlp
