#include "spanrel/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace spanrel::nn {

Adam::Adam(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
  if (cfg_.total_steps == 0) throw std::invalid_argument("adam: total_steps must be positive");
  m_.reserve(params.all().size());
  v_.reserve(params.all().size());
  for (const auto& p : params.all()) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

double Adam::lr_at(std::size_t t) const {
  if (t >= cfg_.total_steps) return 0.0;
  const double remaining = static_cast<double>(cfg_.total_steps - t);
  return cfg_.base_lr * remaining / static_cast<double>(cfg_.total_steps);
}

void Adam::step(ParamStore& params) {
  const auto& tensors = params.all();
  if (tensors.size() != m_.size())
    throw std::invalid_argument("adam: parameter count changed since construction");

  // Validate before mutating anything so a bad gradient aborts the whole step.
  for (const auto& p : tensors)
    for (double g : p->grad)
      if (!std::isfinite(g))
        throw std::runtime_error("adam: non-finite gradient in parameter '" + p->name + "'");

  t_ += 1;
  const double lr = lr_at(t_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < tensors.size(); ++pi) {
    auto& p = *tensors[pi];
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

}  // namespace spanrel::nn
