#include "spanrel/rnn.hpp"

#include <cmath>
#include <stdexcept>

#include "spanrel/rng.hpp"

namespace spanrel::nn {

CellKind cell_kind_from_string(const std::string& s) {
  if (s == "lstm") return CellKind::lstm;
  if (s == "gru") return CellKind::gru;
  throw std::invalid_argument("unknown rnn cell '" + s + "' (expected lstm or gru)");
}

std::string to_string(CellKind k) { return k == CellKind::lstm ? "lstm" : "gru"; }

namespace {

RnnDirection make_direction(ParamStore& store, const std::string& prefix, CellKind kind,
                            std::size_t in_dim, std::size_t hidden, Rng& rng) {
  if (hidden == 0) throw std::invalid_argument("rnn: hidden size must be positive");
  RnnDirection dir;
  dir.kind = kind;
  dir.in_dim = in_dim;
  dir.hidden = hidden;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  const std::vector<std::string> names = kind == CellKind::lstm
                                             ? std::vector<std::string>{"i", "f", "g", "o"}
                                             : std::vector<std::string>{"z", "r", "n"};
  for (const auto& g : names) {
    GateParams gp;
    gp.w = store.create(prefix + ".w_" + g, {in_dim, hidden});
    gp.u = store.create(prefix + ".u_" + g, {hidden, hidden});
    gp.b = store.create(prefix + ".b_" + g, {hidden});
    fill_uniform(gp.w, rng, -bound, bound);
    fill_uniform(gp.u, rng, -bound, bound);
    if (kind == CellKind::lstm && g == "f")
      fill_constant(gp.b, 1.0);
    else
      fill_uniform(gp.b, rng, -bound, bound);
    dir.gates.push_back(std::move(gp));
  }
  return dir;
}

Tensor gate_pre(const GateParams& gp, const Tensor& x, const Tensor& h_prev) {
  return add(affine(x, gp.w, gp.b), vecmat(h_prev, gp.u));
}

}  // namespace

BiRnnParams make_birnn(ParamStore& store, const std::string& prefix, CellKind kind,
                       std::size_t in_dim, std::size_t hidden, Rng& rng) {
  BiRnnParams params;
  params.fwd = make_direction(store, prefix + ".fwd", kind, in_dim, hidden, rng);
  params.bwd = make_direction(store, prefix + ".bwd", kind, in_dim, hidden, rng);
  return params;
}

std::vector<Tensor> rnn_direction_states(const RnnDirection& dir, const Tensor& seq,
                                         bool reverse) {
  if (!seq->is_matrix()) throw std::invalid_argument("rnn: sequence must be a matrix");
  if (seq->shape[1] != dir.in_dim)
    throw std::invalid_argument("rnn: input dim mismatch");
  const std::size_t n = seq->shape[0];
  if (n == 0) throw std::invalid_argument("rnn: empty sequence");

  std::vector<Tensor> states(n);
  Tensor h = constant_fill({dir.hidden}, 0.0);
  Tensor c = constant_fill({dir.hidden}, 0.0);  // lstm only
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = reverse ? n - 1 - step : step;
    Tensor x = row(seq, i);
    if (dir.kind == CellKind::lstm) {
      Tensor ig = sigmoid(gate_pre(dir.gates[0], x, h));
      Tensor fg = sigmoid(gate_pre(dir.gates[1], x, h));
      Tensor gg = tanh(gate_pre(dir.gates[2], x, h));
      Tensor og = sigmoid(gate_pre(dir.gates[3], x, h));
      c = add(mul(fg, c), mul(ig, gg));
      h = mul(og, tanh(c));
    } else {
      Tensor zg = sigmoid(gate_pre(dir.gates[0], x, h));
      Tensor rg = sigmoid(gate_pre(dir.gates[1], x, h));
      const GateParams& ng = dir.gates[2];
      Tensor cand = tanh(add(affine(x, ng.w, ng.b), vecmat(mul(rg, h), ng.u)));
      h = add(mul(one_minus(zg), h), mul(zg, cand));
    }
    states[i] = h;
  }
  return states;
}

BiRnnOutput birnn_run(const BiRnnParams& params, const Tensor& seq) {
  auto fwd = rnn_direction_states(params.fwd, seq, false);
  auto bwd = rnn_direction_states(params.bwd, seq, true);
  const std::size_t n = fwd.size();
  std::vector<Tensor> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rows.push_back(concat({fwd[i], bwd[i]}));
  BiRnnOutput out;
  out.seq = stack_rows(rows);
  out.final_fwd = fwd[n - 1];
  out.final_bwd = bwd[0];
  return out;
}

Tensor birnn_encode(const BiRnnParams& params, const Tensor& seq) {
  return birnn_run(params, seq).seq;
}

}  // namespace spanrel::nn
