#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spanrel/tensor.hpp"

namespace spanrel::nn {

struct GradCheckOptions {
  double eps = 1e-4;                    // central-difference step
  std::size_t max_coords_per_param = 6; // sampled coordinates per tensor
  std::uint64_t seed = 1234;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
};

// Central finite differences against the analytic gradient of the loss the
// builder produces. The builder must rebuild the graph from the current
// parameter values on every call and must be deterministic (no dropout);
// non-determinism is detected and rejected. Relative error per coordinate is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckReport finite_diff_grad_check(const std::function<Tensor()>& loss_builder,
                                       const std::vector<Tensor>& params,
                                       const GradCheckOptions& opts = {});

}  // namespace spanrel::nn
