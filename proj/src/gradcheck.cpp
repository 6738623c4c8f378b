#include "spanrel/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spanrel/rng.hpp"

namespace spanrel::nn {

GradCheckReport finite_diff_grad_check(const std::function<Tensor()>& loss_builder,
                                       const std::vector<Tensor>& params,
                                       const GradCheckOptions& opts) {
  if (opts.eps <= 0.0) throw std::invalid_argument("grad check: eps must be positive");

  auto loss_value = [&]() {
    Tensor l = loss_builder();
    if (!l || l->size() != 1) throw std::invalid_argument("grad check: loss must be a scalar");
    return l;
  };

  // Two evaluations must agree bitwise; dropout or other stochastic pieces in
  // the loss make finite differences meaningless.
  Tensor first = loss_value();
  Tensor second = loss_value();
  if (first->value[0] != second->value[0])
    throw std::runtime_error(
        "grad check: loss is non-deterministic (is dropout enabled?); run in eval mode");

  for (const auto& p : params) p->zero_grad();
  backward(first);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->grad);
  for (const auto& p : params) p->zero_grad();

  Rng rng(opts.seed);
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = *params[pi];
    std::vector<std::size_t> coords(p.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > opts.max_coords_per_param) {
      rng.shuffle(coords);
      coords.resize(opts.max_coords_per_param);
    }
    for (std::size_t ci : coords) {
      const double saved = p.value[ci];
      p.value[ci] = saved + opts.eps;
      const double f_plus = loss_value()->value[0];
      p.value[ci] = saved - opts.eps;
      const double f_minus = loss_value()->value[0];
      p.value[ci] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * opts.eps);
      const double a = analytic[pi][ci];
      const double rel =
          std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p.name.empty() ? ("param#" + std::to_string(pi)) : p.name;
        report.worst_index = ci;
      }
    }
  }
  return report;
}

}  // namespace spanrel::nn
