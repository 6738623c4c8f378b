#pragma once

#include <string>
#include <vector>

#include "spanrel/params.hpp"
#include "spanrel/tensor.hpp"

namespace spanrel::nn {

enum class CellKind { lstm, gru };

CellKind cell_kind_from_string(const std::string& s);
std::string to_string(CellKind k);

struct GateParams {
  Tensor w;  // input projection, in×h
  Tensor u;  // recurrent projection, h×h
  Tensor b;  // bias, h
};

// One direction of a recurrent encoder.
// lstm gate order: input, forget, cell candidate, output.
// gru gate order: update, reset, candidate (Cho et al. formulation,
// h_t = (1-z)∘h_prev + z∘candidate, reset applied before the recurrent matmul).
struct RnnDirection {
  CellKind kind = CellKind::lstm;
  std::size_t in_dim = 0;
  std::size_t hidden = 0;
  std::vector<GateParams> gates;
};

struct BiRnnParams {
  RnnDirection fwd;
  RnnDirection bwd;
  std::size_t out_dim() const { return fwd.hidden + bwd.hidden; }
};

// Registers all gate tensors under `prefix`. Weights are uniform in
// [-1/√h, +1/√h]; the LSTM forget bias starts at 1, all other biases at their
// uniform draw.
BiRnnParams make_birnn(ParamStore& store, const std::string& prefix, CellKind kind,
                       std::size_t in_dim, std::size_t hidden, Rng& rng);

// Hidden states for one direction; states[i] is the state after consuming
// seq[0..i] (forward) or seq[n-1..i] (reverse).
std::vector<Tensor> rnn_direction_states(const RnnDirection& dir, const Tensor& seq,
                                         bool reverse);

struct BiRnnOutput {
  Tensor seq;        // n×(2h): forward state ⊕ backward state per position
  Tensor final_fwd;  // state after the full forward sweep
  Tensor final_bwd;  // state after the full backward sweep
};

BiRnnOutput birnn_run(const BiRnnParams& params, const Tensor& seq);

// The n×2h encoding alone.
Tensor birnn_encode(const BiRnnParams& params, const Tensor& seq);

}  // namespace spanrel::nn
