#pragma once

#include <cstddef>
#include <vector>

#include "spanrel/params.hpp"

namespace spanrel::nn {

struct AdamConfig {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t total_steps = 1;  // linear decay horizon
};

// Bias-corrected Adam with a linear learning-rate decay from base_lr to zero
// over total_steps. Moment buffers follow the store's registration order.
class Adam {
 public:
  Adam(const ParamStore& params, AdamConfig cfg);

  // Consumes the gradients currently held by the parameters (does not zero
  // them). Throws if any gradient is non-finite, naming the parameter.
  void step(ParamStore& params);

  // Effective learning rate at step t (1-based); exactly 0 at t = total_steps.
  double lr_at(std::size_t t) const;
  std::size_t step_count() const { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace spanrel::nn
