#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "spanrel/tensor.hpp"

namespace spanrel::nn {

class Rng;

// Named trainable tensors in deterministic registration order. Registration
// order fixes both optimizer-state layout and checkpoint layout.
class ParamStore {
 public:
  Tensor create(const std::string& name, Shape shape);
  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const { return by_name_.count(name) > 0; }
  const std::vector<Tensor>& all() const { return order_; }
  std::size_t total_size() const;
  void zero_grad();

 private:
  std::vector<Tensor> order_;
  std::unordered_map<std::string, Tensor> by_name_;
};

void fill_uniform(const Tensor& t, Rng& rng, double lo, double hi);
void fill_constant(const Tensor& t, double v);

}  // namespace spanrel::nn
