#include "spanrel/params.hpp"

#include <algorithm>
#include <stdexcept>

#include "spanrel/rng.hpp"

namespace spanrel::nn {

Tensor ParamStore::create(const std::string& name, Shape shape) {
  if (name.empty()) throw std::invalid_argument("param: empty name");
  if (by_name_.count(name)) throw std::invalid_argument("param: duplicate name '" + name + "'");
  auto t = make_tensor(std::move(shape), true);
  t->name = name;
  order_.push_back(t);
  by_name_.emplace(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::invalid_argument("param: unknown name '" + name + "'");
  return it->second;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& t : order_) n += t->size();
  return n;
}

void ParamStore::zero_grad() {
  for (const auto& t : order_) t->zero_grad();
}

void fill_uniform(const Tensor& t, Rng& rng, double lo, double hi) {
  for (double& v : t->value) v = rng.uniform(lo, hi);
}

void fill_constant(const Tensor& t, double v) {
  std::fill(t->value.begin(), t->value.end(), v);
}

}  // namespace spanrel::nn
