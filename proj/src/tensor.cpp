#include "spanrel/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "spanrel/rng.hpp"

namespace spanrel::nn {

namespace {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

Tensor op_node(Shape shape, std::initializer_list<Tensor> parents) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  auto t = std::make_shared<TensorNode>(std::move(shape), rg);
  if (rg) t->parents.assign(parents.begin(), parents.end());
  return t;
}

Tensor op_node(Shape shape, const std::vector<Tensor>& parents) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  auto t = std::make_shared<TensorNode>(std::move(shape), rg);
  if (rg) t->parents = parents;
  return t;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

TensorNode::TensorNode(Shape s, bool rg)
    : shape(std::move(s)), requires_grad(rg) {
  if (shape.empty() || shape.size() > 2)
    throw std::invalid_argument("tensor: rank must be 1 or 2, got " + shape_str(shape));
  value.assign(numel(shape), 0.0);
  grad.assign(value.size(), 0.0);
}

void TensorNode::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

Tensor make_tensor(Shape shape, bool requires_grad) {
  return std::make_shared<TensorNode>(std::move(shape), requires_grad);
}

Tensor constant(Shape shape, std::vector<double> values) {
  auto t = make_tensor(std::move(shape), false);
  require(values.size() == t->size(), "constant: value count does not match shape");
  t->value = std::move(values);
  return t;
}

Tensor constant_fill(Shape shape, double v) {
  auto t = make_tensor(std::move(shape), false);
  std::fill(t->value.begin(), t->value.end(), v);
  return t;
}

Tensor scalar_const(double v) { return constant({1}, {v}); }

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require(a->shape == b->shape,
          "add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  auto out = op_node(a->shape, {a, b});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] + b->value[i];
  if (out->requires_grad) {
    out->backward_fn = [a, b](TensorNode& self) {
      if (a->requires_grad)
        for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < self.size(); ++i) b->grad[i] += self.grad[i];
    };
  }
  return out;
}

Tensor add_n(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "add_n: empty input");
  for (const auto& x : xs)
    require(x->shape == xs[0]->shape, "add_n: shape mismatch");
  auto out = op_node(xs[0]->shape, xs);
  for (const auto& x : xs)
    for (std::size_t i = 0; i < out->size(); ++i) out->value[i] += x->value[i];
  if (out->requires_grad) {
    out->backward_fn = [xs](TensorNode& self) {
      for (const auto& x : xs)
        if (x->requires_grad)
          for (std::size_t i = 0; i < self.size(); ++i) x->grad[i] += self.grad[i];
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a->shape == b->shape, "sub: shape mismatch");
  auto out = op_node(a->shape, {a, b});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] - b->value[i];
  if (out->requires_grad) {
    out->backward_fn = [a, b](TensorNode& self) {
      if (a->requires_grad)
        for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < self.size(); ++i) b->grad[i] -= self.grad[i];
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a->shape == b->shape, "mul: shape mismatch");
  auto out = op_node(a->shape, {a, b});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] * b->value[i];
  if (out->requires_grad) {
    out->backward_fn = [a, b](TensorNode& self) {
      if (a->requires_grad)
        for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i] * b->value[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < self.size(); ++i) b->grad[i] += self.grad[i] * a->value[i];
    };
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  auto out = op_node(a->shape, {a});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] * s;
  if (out->requires_grad) {
    out->backward_fn = [a, s](TensorNode& self) {
      for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i] * s;
    };
  }
  return out;
}

Tensor one_minus(const Tensor& a) {
  auto out = op_node(a->shape, {a});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = 1.0 - a->value[i];
  if (out->requires_grad) {
    out->backward_fn = [a](TensorNode& self) {
      for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] -= self.grad[i];
    };
  }
  return out;
}

Tensor relu(const Tensor& a) {
  auto out = op_node(a->shape, {a});
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
  if (out->requires_grad) {
    out->backward_fn = [a](TensorNode& self) {
      for (std::size_t i = 0; i < self.size(); ++i)
        if (a->value[i] > 0.0) a->grad[i] += self.grad[i];
    };
  }
  return out;
}

Tensor tanh(const Tensor& a) {
  auto out = op_node(a->shape, {a});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = std::tanh(a->value[i]);
  if (out->requires_grad) {
    out->backward_fn = [a](TensorNode& self) {
      for (std::size_t i = 0; i < self.size(); ++i)
        a->grad[i] += self.grad[i] * (1.0 - self.value[i] * self.value[i]);
    };
  }
  return out;
}

Tensor sigmoid(const Tensor& a) {
  auto out = op_node(a->shape, {a});
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = stable_sigmoid(a->value[i]);
  if (out->requires_grad) {
    out->backward_fn = [a](TensorNode& self) {
      for (std::size_t i = 0; i < self.size(); ++i)
        a->grad[i] += self.grad[i] * self.value[i] * (1.0 - self.value[i]);
    };
  }
  return out;
}

// ------------------------------------------------------------- linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a->is_matrix() && b->is_matrix(), "matmul: expects two matrices");
  require(a->shape[1] == b->shape[0], "matmul: inner dimensions " + shape_str(a->shape) +
                                          " vs " + shape_str(b->shape));
  const std::size_t n = a->shape[0], k = a->shape[1], m = b->shape[1];
  auto out = op_node({n, m}, {a, b});
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a->value.data() + i * k;
    double* orow = out->value.data() + i * m;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = arow[t];
      if (av == 0.0) continue;
      const double* brow = b->value.data() + t * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  if (out->requires_grad) {
    out->backward_fn = [a, b, n, k, m](TensorNode& self) {
      if (a->requires_grad) {
        // dA = dC·Bᵀ
        for (std::size_t i = 0; i < n; ++i) {
          const double* grow = self.grad.data() + i * m;
          double* agrow = a->grad.data() + i * k;
          for (std::size_t t = 0; t < k; ++t) {
            const double* brow = b->value.data() + t * m;
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
            agrow[t] += acc;
          }
        }
      }
      if (b->requires_grad) {
        // dB = Aᵀ·dC
        for (std::size_t i = 0; i < n; ++i) {
          const double* arow = a->value.data() + i * k;
          const double* grow = self.grad.data() + i * m;
          for (std::size_t t = 0; t < k; ++t) {
            const double av = arow[t];
            if (av == 0.0) continue;
            double* bgrow = b->grad.data() + t * m;
            for (std::size_t j = 0; j < m; ++j) bgrow[j] += av * grow[j];
          }
        }
      }
    };
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require(a->is_matrix(), "transpose: expects a matrix");
  const std::size_t n = a->shape[0], m = a->shape[1];
  auto out = op_node({m, n}, {a});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out->value[j * n + i] = a->value[i * m + j];
  if (out->requires_grad) {
    out->backward_fn = [a, n, m](TensorNode& self) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) a->grad[i * m + j] += self.grad[j * n + i];
    };
  }
  return out;
}

Tensor vecmat(const Tensor& x, const Tensor& w) {
  require(x->is_vector() && w->is_matrix(), "vecmat: expects vector · matrix");
  require(x->shape[0] == w->shape[0], "vecmat: dimension mismatch " + shape_str(x->shape) +
                                          " vs " + shape_str(w->shape));
  const std::size_t in = w->shape[0], outn = w->shape[1];
  auto out = op_node({outn}, {x, w});
  for (std::size_t i = 0; i < in; ++i) {
    const double xv = x->value[i];
    if (xv == 0.0) continue;
    const double* wrow = w->value.data() + i * outn;
    for (std::size_t j = 0; j < outn; ++j) out->value[j] += xv * wrow[j];
  }
  if (out->requires_grad) {
    out->backward_fn = [x, w, in, outn](TensorNode& self) {
      if (x->requires_grad) {
        for (std::size_t i = 0; i < in; ++i) {
          const double* wrow = w->value.data() + i * outn;
          double acc = 0.0;
          for (std::size_t j = 0; j < outn; ++j) acc += self.grad[j] * wrow[j];
          x->grad[i] += acc;
        }
      }
      if (w->requires_grad) {
        for (std::size_t i = 0; i < in; ++i) {
          const double xv = x->value[i];
          if (xv == 0.0) continue;
          double* wgrow = w->grad.data() + i * outn;
          for (std::size_t j = 0; j < outn; ++j) wgrow[j] += xv * self.grad[j];
        }
      }
    };
  }
  return out;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(b->is_vector() && b->shape[0] == w->shape[1], "affine: bias dimension mismatch");
  return add(vecmat(x, w), b);
}

Tensor linear_rows(const Tensor& m, const Tensor& w) { return matmul(m, w); }

Tensor linear_rows(const Tensor& m, const Tensor& w, const Tensor& b) {
  require(m->is_matrix(), "linear_rows: expects a matrix input");
  require(b->is_vector() && b->shape[0] == w->shape[1], "linear_rows: bias dimension mismatch");
  auto prod = matmul(m, w);
  const std::size_t n = prod->shape[0], c = prod->shape[1];
  auto out = op_node({n, c}, {prod, b});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out->value[i * c + j] = prod->value[i * c + j] + b->value[j];
  if (out->requires_grad) {
    out->backward_fn = [prod, b, n, c](TensorNode& self) {
      if (prod->requires_grad)
        for (std::size_t i = 0; i < self.size(); ++i) prod->grad[i] += self.grad[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) b->grad[j] += self.grad[i * c + j];
    };
  }
  return out;
}

Tensor softmax_rows(const Tensor& m) {
  require(m->is_matrix(), "softmax_rows: expects a matrix");
  const std::size_t n = m->shape[0], c = m->shape[1];
  require(c >= 1, "softmax_rows: empty rows");
  auto out = op_node({n, c}, {m});
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = m->value.data() + i * c;
    double* y = out->value.data() + i * c;
    double mx = x[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (std::size_t j = 0; j < c; ++j) y[j] /= sum;
  }
  if (out->requires_grad) {
    out->backward_fn = [m, n, c](TensorNode& self) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* y = self.value.data() + i * c;
        const double* dy = self.grad.data() + i * c;
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += y[j] * dy[j];
        double* dx = m->grad.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) dx[j] += y[j] * (dy[j] - dot);
      }
    };
  }
  return out;
}

// ------------------------------------------------------------- shape plumbing

Tensor row(const Tensor& m, std::size_t i) {
  require(m->is_matrix(), "row: expects a matrix");
  require(i < m->shape[0], "row: index out of range");
  const std::size_t c = m->shape[1];
  auto out = op_node({c}, {m});
  std::copy_n(m->value.data() + i * c, c, out->value.data());
  if (out->requires_grad) {
    out->backward_fn = [m, i, c](TensorNode& self) {
      double* g = m->grad.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[j];
    };
  }
  return out;
}

Tensor rows_slice(const Tensor& m, std::size_t r0, std::size_t r1) {
  require(m->is_matrix(), "rows_slice: expects a matrix");
  require(r0 < r1 && r1 <= m->shape[0], "rows_slice: bad range");
  const std::size_t c = m->shape[1], n = r1 - r0;
  auto out = op_node({n, c}, {m});
  std::copy_n(m->value.data() + r0 * c, n * c, out->value.data());
  if (out->requires_grad) {
    out->backward_fn = [m, r0, c, n](TensorNode& self) {
      double* g = m->grad.data() + r0 * c;
      for (std::size_t i = 0; i < n * c; ++i) g[i] += self.grad[i];
    };
  }
  return out;
}

Tensor slice_cols(const Tensor& m, std::size_t c0, std::size_t c1) {
  require(m->is_matrix(), "slice_cols: expects a matrix");
  require(c0 < c1 && c1 <= m->shape[1], "slice_cols: bad range");
  const std::size_t n = m->shape[0], c = m->shape[1], w = c1 - c0;
  auto out = op_node({n, w}, {m});
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(m->value.data() + i * c + c0, w, out->value.data() + i * w);
  if (out->requires_grad) {
    out->backward_fn = [m, c0, n, c, w](TensorNode& self) {
      for (std::size_t i = 0; i < n; ++i) {
        double* g = m->grad.data() + i * c + c0;
        const double* dy = self.grad.data() + i * w;
        for (std::size_t j = 0; j < w; ++j) g[j] += dy[j];
      }
    };
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& vecs) {
  require(!vecs.empty(), "concat: empty input");
  std::size_t total = 0;
  for (const auto& v : vecs) {
    require(v->is_vector(), "concat: expects vectors");
    total += v->shape[0];
  }
  auto out = op_node({total}, vecs);
  std::size_t off = 0;
  for (const auto& v : vecs) {
    std::copy_n(v->value.data(), v->shape[0], out->value.data() + off);
    off += v->shape[0];
  }
  if (out->requires_grad) {
    out->backward_fn = [vecs](TensorNode& self) {
      std::size_t off = 0;
      for (const auto& v : vecs) {
        if (v->requires_grad)
          for (std::size_t j = 0; j < v->shape[0]; ++j) v->grad[j] += self.grad[off + j];
        off += v->shape[0];
      }
    };
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& mats) {
  require(!mats.empty(), "concat_cols: empty input");
  const std::size_t n = mats[0]->shape[0];
  std::size_t total = 0;
  for (const auto& m : mats) {
    require(m->is_matrix() && m->shape[0] == n, "concat_cols: row counts differ");
    total += m->shape[1];
  }
  auto out = op_node({n, total}, mats);
  std::size_t off = 0;
  for (const auto& m : mats) {
    const std::size_t c = m->shape[1];
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(m->value.data() + i * c, c, out->value.data() + i * total + off);
    off += c;
  }
  if (out->requires_grad) {
    out->backward_fn = [mats, n, total](TensorNode& self) {
      std::size_t off = 0;
      for (const auto& m : mats) {
        const std::size_t c = m->shape[1];
        if (m->requires_grad)
          for (std::size_t i = 0; i < n; ++i) {
            double* g = m->grad.data() + i * c;
            const double* dy = self.grad.data() + i * total + off;
            for (std::size_t j = 0; j < c; ++j) g[j] += dy[j];
          }
        off += c;
      }
    };
  }
  return out;
}

Tensor stack_rows(const std::vector<Tensor>& vecs) {
  require(!vecs.empty(), "stack_rows: empty input");
  const std::size_t c = vecs[0]->shape[0];
  for (const auto& v : vecs)
    require(v->is_vector() && v->shape[0] == c, "stack_rows: dimension mismatch");
  auto out = op_node({vecs.size(), c}, vecs);
  for (std::size_t i = 0; i < vecs.size(); ++i)
    std::copy_n(vecs[i]->value.data(), c, out->value.data() + i * c);
  if (out->requires_grad) {
    out->backward_fn = [vecs, c](TensorNode& self) {
      for (std::size_t i = 0; i < vecs.size(); ++i)
        if (vecs[i]->requires_grad) {
          const double* dy = self.grad.data() + i * c;
          for (std::size_t j = 0; j < c; ++j) vecs[i]->grad[j] += dy[j];
        }
    };
  }
  return out;
}

Tensor vcat(const Tensor& a, const Tensor& b) {
  require(a->is_matrix() && b->is_matrix() && a->shape[1] == b->shape[1],
          "vcat: column counts differ");
  const std::size_t na = a->shape[0], nb = b->shape[0], c = a->shape[1];
  auto out = op_node({na + nb, c}, {a, b});
  std::copy_n(a->value.data(), na * c, out->value.data());
  std::copy_n(b->value.data(), nb * c, out->value.data() + na * c);
  if (out->requires_grad) {
    out->backward_fn = [a, b, na, nb, c](TensorNode& self) {
      if (a->requires_grad)
        for (std::size_t i = 0; i < na * c; ++i) a->grad[i] += self.grad[i];
      if (b->requires_grad)
        for (std::size_t i = 0; i < nb * c; ++i) b->grad[i] += self.grad[na * c + i];
    };
  }
  return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& idx) {
  require(table->is_matrix(), "gather_rows: expects a matrix table");
  require(!idx.empty(), "gather_rows: empty index list");
  const std::size_t c = table->shape[1];
  for (std::size_t i : idx) require(i < table->shape[0], "gather_rows: index out of range");
  auto out = op_node({idx.size(), c}, {table});
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(table->value.data() + idx[i] * c, c, out->value.data() + i * c);
  if (out->requires_grad) {
    out->backward_fn = [table, idx, c](TensorNode& self) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        double* g = table->grad.data() + idx[i] * c;
        const double* dy = self.grad.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) g[j] += dy[j];
      }
    };
  }
  return out;
}

Tensor replace_rows(const Tensor& m, const std::vector<std::uint8_t>& flags, const Tensor& fill) {
  require(m->is_matrix(), "replace_rows: expects a matrix");
  require(flags.size() == m->shape[0], "replace_rows: flag count != row count");
  require(fill->is_vector() && fill->shape[0] == m->shape[1],
          "replace_rows: fill dimension mismatch");
  const std::size_t n = m->shape[0], c = m->shape[1];
  auto out = op_node({n, c}, {m, fill});
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = flags[i] ? fill->value.data() : m->value.data() + i * c;
    std::copy_n(src, c, out->value.data() + i * c);
  }
  if (out->requires_grad) {
    out->backward_fn = [m, fill, flags, n, c](TensorNode& self) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* dy = self.grad.data() + i * c;
        if (flags[i]) {
          if (fill->requires_grad)
            for (std::size_t j = 0; j < c; ++j) fill->grad[j] += dy[j];
        } else if (m->requires_grad) {
          double* g = m->grad.data() + i * c;
          for (std::size_t j = 0; j < c; ++j) g[j] += dy[j];
        }
      }
    };
  }
  return out;
}

Tensor max_pool_rows(const Tensor& m) {
  require(m->is_matrix(), "max_pool_rows: expects a matrix");
  const std::size_t n = m->shape[0], c = m->shape[1];
  require(n >= 1, "max_pool_rows: empty sequence");
  auto out = op_node({c}, {m});
  std::vector<std::size_t> arg(c, 0);
  for (std::size_t j = 0; j < c; ++j) out->value[j] = m->value[j];
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double v = m->value[i * c + j];
      if (v > out->value[j]) {  // strict: ties keep the lowest row
        out->value[j] = v;
        arg[j] = i;
      }
    }
  if (out->requires_grad) {
    out->backward_fn = [m, arg, c](TensorNode& self) {
      for (std::size_t j = 0; j < c; ++j) m->grad[arg[j] * c + j] += self.grad[j];
    };
  }
  return out;
}

// ------------------------------------------------------- reductions / losses

Tensor mean_all(const Tensor& x) {
  const std::size_t n = x->size();
  require(n >= 1, "mean_all: empty tensor");
  auto out = op_node({1}, {x});
  double acc = 0.0;
  for (double v : x->value) acc += v;
  out->value[0] = acc / static_cast<double>(n);
  if (out->requires_grad) {
    out->backward_fn = [x, n](TensorNode& self) {
      const double g = self.grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) x->grad[i] += g;
    };
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  require(logits->is_vector(), "cross_entropy: expects a logit vector");
  const std::size_t c = logits->shape[0];
  require(c >= 2, "cross_entropy: needs at least 2 classes");
  require(label < c, "cross_entropy: label out of range");
  auto out = op_node({1}, {logits});
  double mx = logits->value[0];
  for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits->value[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < c; ++j) sum += std::exp(logits->value[j] - mx);
  const double lse = mx + std::log(sum);
  out->value[0] = lse - logits->value[label];
  if (out->requires_grad) {
    out->backward_fn = [logits, label, c, mx, sum](TensorNode& self) {
      const double g = self.grad[0];
      for (std::size_t j = 0; j < c; ++j) {
        const double p = std::exp(logits->value[j] - mx) / sum;
        logits->grad[j] += g * (p - (j == label ? 1.0 : 0.0));
      }
    };
  }
  return out;
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
  require(logits->is_vector(), "bce_with_logits: expects a logit vector");
  require(targets.size() == logits->shape[0], "bce_with_logits: target count mismatch");
  for (double t : targets)
    require(t == 0.0 || t == 1.0, "bce_with_logits: targets must be 0 or 1");
  const std::size_t c = logits->shape[0];
  auto out = op_node({c}, {logits});
  for (std::size_t j = 0; j < c; ++j) {
    const double x = logits->value[j];
    // max(x,0) - x·t + log(1 + exp(-|x|)): stable for |x| up to overflow
    out->value[j] = std::max(x, 0.0) - x * targets[j] + std::log1p(std::exp(-std::fabs(x)));
  }
  if (out->requires_grad) {
    out->backward_fn = [logits, targets, c](TensorNode& self) {
      for (std::size_t j = 0; j < c; ++j)
        logits->grad[j] += self.grad[j] * (stable_sigmoid(logits->value[j]) - targets[j]);
    };
  }
  return out;
}

// ------------------------------------------------------------------ attention

Attention scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  require(q->is_matrix() && k->is_matrix() && v->is_matrix(),
          "scaled_dot_attention: expects matrices");
  require(q->shape[1] == k->shape[1], "scaled_dot_attention: Q/K feature dims differ");
  require(k->shape[0] == v->shape[0], "scaled_dot_attention: K/V row counts differ");
  require(q->shape[1] >= 1, "scaled_dot_attention: feature dim must be >= 1");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q->shape[1]));
  auto scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
  auto weights = softmax_rows(scores);
  return Attention{matmul(weights, v), weights};
}

// ------------------------------------------------------------- regularization

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
  if (rate == 0.0) return x;
  const double keep = 1.0 - rate;
  std::vector<double> mask(x->size());
  for (double& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  auto out = op_node(x->shape, {x});
  for (std::size_t i = 0; i < x->size(); ++i) out->value[i] = x->value[i] * mask[i];
  if (out->requires_grad) {
    out->backward_fn = [x, mask = std::move(mask)](TensorNode& self) {
      for (std::size_t i = 0; i < self.size(); ++i) x->grad[i] += self.grad[i] * mask[i];
    };
  }
  return out;
}

// ------------------------------------------------------------------- backward

void backward(const Tensor& loss) {
  require(loss != nullptr, "backward: null loss");
  require(loss->size() == 1, "backward: loss must be a scalar");
  if (!loss->requires_grad) return;

  // Iterative post-order DFS restricted to the requires_grad subgraph; node
  // creation order already respects dependencies, but DFS keeps this correct
  // for any graph wiring.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    TensorNode* node = top.first;
    if (top.second < node->parents.size()) {
      TensorNode* parent = node->parents[top.second].get();
      ++top.second;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

}  // namespace spanrel::nn
