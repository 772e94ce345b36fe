#pragma once

#include <string>
#include <vector>

#include "qg/graph.hpp"
#include "qg/rng.hpp"

namespace qg {

// One LSTM cell: separate input->gate and state->gate weights plus bias for
// the input/forget/output/candidate gates. Forget-gate bias starts at 1.0.
struct LstmCellParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Param* w_i = nullptr;
  Param* w_f = nullptr;
  Param* w_o = nullptr;
  Param* w_c = nullptr;
  Param* u_i = nullptr;
  Param* u_f = nullptr;
  Param* u_o = nullptr;
  Param* u_c = nullptr;
  Param* b_i = nullptr;
  Param* b_f = nullptr;
  Param* b_o = nullptr;
  Param* b_c = nullptr;

  static LstmCellParams create(ParamSet& ps, const std::string& prefix, std::size_t input_dim,
                               std::size_t hidden_dim, RngStream& rng) {
    LstmCellParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    auto w = [&](const char* name) {
      return &ps.add(prefix + "." + name, Tensor::uniform(input_dim, hidden_dim, rng));
    };
    auto u = [&](const char* name) {
      return &ps.add(prefix + "." + name, Tensor::uniform(hidden_dim, hidden_dim, rng));
    };
    p.w_i = w("w_i");
    p.w_f = w("w_f");
    p.w_o = w("w_o");
    p.w_c = w("w_c");
    p.u_i = u("u_i");
    p.u_f = u("u_f");
    p.u_o = u("u_o");
    p.u_c = u("u_c");
    p.b_i = &ps.add(prefix + ".b_i", Tensor(1, hidden_dim));
    p.b_f = &ps.add(prefix + ".b_f", Tensor::full(1, hidden_dim, 1.0));
    p.b_o = &ps.add(prefix + ".b_o", Tensor(1, hidden_dim));
    p.b_c = &ps.add(prefix + ".b_c", Tensor(1, hidden_dim));
    return p;
  }
};

struct LstmState {
  Var h;
  Var c;
};

inline LstmState lstm_zero_state(Graph& g, std::size_t hidden_dim) {
  Var z = g.constant(Tensor(1, hidden_dim));
  return {z, z};
}

// Standard gate equations: sigmoid gates, tanh candidate and output squashing.
inline LstmState lstm_cell_step(Graph& g, const LstmCellParams& p, Var x, const LstmState& prev) {
  if (x.cols() != p.input_dim)
    throw ShapeError("lstm input " + x.value().shape_str() + " does not match input_dim " +
                     std::to_string(p.input_dim));
  auto gate = [&](Param* w, Param* u, Param* b) {
    return add(add(matmul(x, g.param(*w)), matmul(prev.h, g.param(*u))), g.param(*b));
  };
  Var i = sigmoid(gate(p.w_i, p.u_i, p.b_i));
  Var f = sigmoid(gate(p.w_f, p.u_f, p.b_f));
  Var o = sigmoid(gate(p.w_o, p.u_o, p.b_o));
  Var cand = tanh(gate(p.w_c, p.u_c, p.b_c));
  Var c = add(mul(f, prev.c), mul(i, cand));
  Var h = mul(o, tanh(c));
  return {h, c};
}

// Per-token annotation vectors: concatenated forward/backward states of a
// bidirectional pass. Rows at or beyond `length` stay zero. fwd_final and
// bwd_final are the last states of each directional pass (valid when
// length > 0), which is what "final state of the BiLSTM" means downstream.
struct AnnotationMatrix {
  Var h;                   // [n x (fwd hidden + bwd hidden)]
  std::size_t rows = 0;    // n (padded row count)
  std::size_t length = 0;  // true token count
  Var fwd_final;
  Var bwd_final;
};

inline AnnotationMatrix bilstm_encode(Graph& g, const LstmCellParams& fwd,
                                      const LstmCellParams& bwd, const std::vector<Var>& inputs,
                                      std::size_t length) {
  if (length > inputs.size())
    throw ShapeError("true length " + std::to_string(length) + " exceeds sequence rows " +
                     std::to_string(inputs.size()));
  const std::size_t n = inputs.size();
  AnnotationMatrix out;
  out.rows = n;
  out.length = length;
  const std::size_t width = fwd.hidden_dim + bwd.hidden_dim;
  if (length == 0) {
    out.h = g.constant(Tensor(0, width));
    return out;
  }

  std::vector<Var> hf(length), hb(length);
  LstmState state = lstm_zero_state(g, fwd.hidden_dim);
  for (std::size_t t = 0; t < length; ++t) {
    state = lstm_cell_step(g, fwd, inputs[t], state);
    hf[t] = state.h;
  }
  out.fwd_final = state.h;
  state = lstm_zero_state(g, bwd.hidden_dim);
  for (std::size_t t = length; t-- > 0;) {
    state = lstm_cell_step(g, bwd, inputs[t], state);
    hb[t] = state.h;
  }
  out.bwd_final = state.h;

  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t t = 0; t < length; ++t) rows.push_back(concat_cols({hf[t], hb[t]}));
  if (length < n) rows.push_back(g.constant(Tensor(n - length, width)));
  out.h = rows.size() == 1 ? rows[0] : concat_rows(rows);
  return out;
}

}  // namespace qg
