#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace spanrel::nn {

class Rng;

using Shape = std::vector<std::size_t>;

class TensorNode;
using Tensor = std::shared_ptr<TensorNode>;

// One node of the reverse-mode graph: a value buffer, a same-shape gradient
// accumulator, and a closure that pushes this node's gradient into its
// parents. Ops append nodes as they run; backward() replays the closures in
// reverse topological order. Double precision throughout so finite-difference
// checks are meaningful.
//
// A graph is confined to one thread for the duration of a forward/backward
// pass; separate graphs over shared read-only parameters may run in parallel.
class TensorNode {
 public:
  TensorNode(Shape s, bool rg);

  std::size_t size() const { return value.size(); }
  std::size_t rows() const { return shape[0]; }
  std::size_t cols() const { return shape.size() == 2 ? shape[1] : shape[0]; }
  bool is_matrix() const { return shape.size() == 2; }
  bool is_vector() const { return shape.size() == 1; }
  bool is_scalar() const { return shape.size() == 1 && shape[0] == 1; }

  double& at(std::size_t r, std::size_t c) { return value[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return value[r * shape[1] + c]; }

  void zero_grad();

  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string name;  // non-empty for named parameters
  std::vector<Tensor> parents;
  std::function<void(TensorNode&)> backward_fn;
};

Tensor make_tensor(Shape shape, bool requires_grad = false);
Tensor constant(Shape shape, std::vector<double> values);
Tensor constant_fill(Shape shape, double v);
Tensor scalar_const(double v);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_n(const std::vector<Tensor>& xs);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor one_minus(const Tensor& a);  // 1 - x
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor vecmat(const Tensor& x, const Tensor& w);                     // (in)·(in×out) -> (out)
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);    // x·W + b
Tensor linear_rows(const Tensor& m, const Tensor& w);                // M·W
Tensor linear_rows(const Tensor& m, const Tensor& w, const Tensor& b);
Tensor softmax_rows(const Tensor& m);

// ---- shape plumbing ----
Tensor row(const Tensor& m, std::size_t i);
Tensor rows_slice(const Tensor& m, std::size_t r0, std::size_t r1);
Tensor slice_cols(const Tensor& m, std::size_t c0, std::size_t c1);
Tensor concat(const std::vector<Tensor>& vecs);       // 1-D concatenation
Tensor concat_cols(const std::vector<Tensor>& mats);  // n×c_i -> n×Σc_i
Tensor stack_rows(const std::vector<Tensor>& vecs);   // n vectors dim c -> n×c
Tensor vcat(const Tensor& a, const Tensor& b);        // stack two matrices row-wise
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& idx);
// Rows with flags[i] != 0 are replaced by `fill`; gradient of a replaced row
// flows into `fill`, the rest into `m`.
Tensor replace_rows(const Tensor& m, const std::vector<std::uint8_t>& flags, const Tensor& fill);
// Column-wise max over all rows; ties route the gradient to the lowest row.
Tensor max_pool_rows(const Tensor& m);

// ---- reductions / losses ----
Tensor mean_all(const Tensor& x);
Tensor cross_entropy(const Tensor& logits, std::size_t label);
// Elementwise stable binary cross entropy on logits; returns per-element loss.
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);

// ---- attention ----
struct Attention {
  Tensor output;
  Tensor weights;  // row-stochastic a×b
};
// softmax(Q·Kᵀ/√d)·V with Q: a×d, K: b×d, V: b×dv.
Attention scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

// ---- regularization ----
// Inverted dropout; draws one mask per call from `rng`. Callers skip it in
// eval mode, where the forward pass must be deterministic.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// Accumulates d(loss)/d(node) into every reachable node that requires grad.
// Call once per graph; parameter gradients accumulate across graphs until
// zeroed.
void backward(const Tensor& loss);

}  // namespace spanrel::nn
