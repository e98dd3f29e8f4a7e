#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pianofinger/params.hpp"
#include "pianofinger/tape.hpp"

namespace pianofinger {

// ---------------------------------------------------------------------------
// LSTM cell. Gates are stacked [input, forget, cell, output] in the rows of
// W (4H x in), U (4H x H) and b (4H). Forget bias starts at +1.
// ---------------------------------------------------------------------------

template <typename T>
struct LstmCellParams {
  Param<T>* W = nullptr;
  Param<T>* U = nullptr;
  Param<T>* b = nullptr;
  int hidden = 0;
};

template <typename T>
inline LstmCellParams<T> add_lstm_cell(ParamStore<T>& store, const std::string& prefix,
                                       int input, int hidden, RngState& rng) {
  LstmCellParams<T> cell;
  cell.hidden = hidden;
  cell.W = &store.add(prefix + ".W", {4 * hidden, input});
  cell.U = &store.add(prefix + ".U", {4 * hidden, hidden});
  cell.b = &store.add(prefix + ".b", {4 * hidden});
  init_uniform(cell.W->value, input, rng);
  init_uniform(cell.U->value, hidden, rng);
  for (int i = hidden; i < 2 * hidden; ++i) cell.b->value[i] = T(1);
  return cell;
}

template <typename T>
struct LstmCellVars {
  typename Tape<T>::Var W, U, b;
  int hidden = 0;
};

template <typename T>
inline LstmCellVars<T> bind_lstm_cell(Tape<T>& tape, const LstmCellParams<T>& p) {
  return {tape.leaf_ref(&p.W->value, &p.W->grad), tape.leaf_ref(&p.U->value, &p.U->grad),
          tape.leaf_ref(&p.b->value, &p.b->grad), p.hidden};
}

template <typename T>
struct HcVars {
  typename Tape<T>::Var h, c;
};

// Standard gate equations; returns (h_t, c_t).
template <typename T>
inline HcVars<T> lstm_cell(Tape<T>& tape, const LstmCellVars<T>& cell,
                           typename Tape<T>::Var x, HcVars<T> prev) {
  const int H = cell.hidden;
  auto pre = tape.add(tape.add(tape.matvec(cell.W, x), tape.matvec(cell.U, prev.h)), cell.b);
  auto i_gate = tape.sigmoid(tape.slice(pre, 0, H));
  auto f_gate = tape.sigmoid(tape.slice(pre, H, H));
  auto g_gate = tape.tanh_op(tape.slice(pre, 2 * H, H));
  auto o_gate = tape.sigmoid(tape.slice(pre, 3 * H, H));
  auto c_t = tape.add(tape.mul(f_gate, prev.c), tape.mul(i_gate, g_gate));
  auto h_t = tape.mul(o_gate, tape.tanh_op(c_t));
  return {h_t, c_t};
}

// ---------------------------------------------------------------------------
// Stacked unidirectional LSTM, inter-layer inverted dropout. The same stack
// serves both whole-sequence runs and incremental stepping.
// ---------------------------------------------------------------------------

template <typename T>
struct LstmStackParams {
  std::vector<LstmCellParams<T>> layers;
};

template <typename T>
inline LstmStackParams<T> add_lstm_stack(ParamStore<T>& store, const std::string& prefix,
                                         int input, int hidden, int layers, RngState& rng) {
  LstmStackParams<T> stack;
  for (int l = 0; l < layers; ++l) {
    int in = l == 0 ? input : hidden;
    stack.layers.push_back(add_lstm_cell(store, prefix + ".l" + std::to_string(l), in, hidden, rng));
  }
  return stack;
}

template <typename T>
struct LstmStackVars {
  std::vector<LstmCellVars<T>> layers;
};

template <typename T>
inline LstmStackVars<T> bind_lstm_stack(Tape<T>& tape, const LstmStackParams<T>& p) {
  LstmStackVars<T> vars;
  for (const auto& cell : p.layers) vars.layers.push_back(bind_lstm_cell(tape, cell));
  return vars;
}

template <typename T>
inline std::vector<HcVars<T>> lstm_zero_state(Tape<T>& tape, const LstmStackVars<T>& stack) {
  std::vector<HcVars<T>> state;
  for (const auto& cell : stack.layers) {
    auto zeros = tape.leaf(Tensor<T>::zeros({cell.hidden}));
    state.push_back({zeros, zeros});
  }
  return state;
}

// One timestep through all layers, mutating `state`; returns the top h.
template <typename T>
inline typename Tape<T>::Var lstm_stack_step(Tape<T>& tape, const LstmStackVars<T>& stack,
                                             std::vector<HcVars<T>>& state,
                                             typename Tape<T>::Var x, T dropout_rate,
                                             RngState& rng, bool train) {
  typename Tape<T>::Var input = x;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    if (l > 0) input = tape.dropout(input, dropout_rate, rng, train);
    state[l] = lstm_cell(tape, stack.layers[l], input, state[l]);
    input = state[l].h;
  }
  return input;
}

// Whole-sequence run, layer-major so dropout masks are drawn per layer in
// timestep order. `reverse` consumes the inputs back to front and reports
// outputs re-aligned to input positions.
template <typename T>
inline std::vector<typename Tape<T>::Var> lstm_stack_run(
    Tape<T>& tape, const LstmStackVars<T>& stack, const std::vector<typename Tape<T>::Var>& inputs,
    bool reverse, T dropout_rate, RngState& rng, bool train) {
  const std::size_t n = inputs.size();
  std::vector<typename Tape<T>::Var> current = inputs;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    if (l > 0) {
      for (auto& v : current) v = tape.dropout(v, dropout_rate, rng, train);
    }
    auto zeros = tape.leaf(Tensor<T>::zeros({stack.layers[l].hidden}));
    HcVars<T> state{zeros, zeros};
    std::vector<typename Tape<T>::Var> next(n);
    for (std::size_t step = 0; step < n; ++step) {
      std::size_t t = reverse ? n - 1 - step : step;
      state = lstm_cell(tape, stack.layers[l], current[t], state);
      next[t] = state.h;
    }
    current = std::move(next);
  }
  return current;
}

// ---------------------------------------------------------------------------
// Bi-LSTM over a sequence: per-timestep [forward_h ; backward_h].
// ---------------------------------------------------------------------------

template <typename T>
struct BilstmParams {
  LstmStackParams<T> fwd, bwd;
};

template <typename T>
inline BilstmParams<T> add_bilstm(ParamStore<T>& store, const std::string& prefix, int input,
                                  int hidden, int layers, RngState& rng) {
  return {add_lstm_stack(store, prefix + ".fwd", input, hidden, layers, rng),
          add_lstm_stack(store, prefix + ".bwd", input, hidden, layers, rng)};
}

template <typename T>
struct BilstmVars {
  LstmStackVars<T> fwd, bwd;
};

template <typename T>
inline BilstmVars<T> bind_bilstm(Tape<T>& tape, const BilstmParams<T>& p) {
  return {bind_lstm_stack(tape, p.fwd), bind_lstm_stack(tape, p.bwd)};
}

template <typename T>
inline std::vector<typename Tape<T>::Var> bilstm_forward(
    Tape<T>& tape, const BilstmVars<T>& vars, const std::vector<typename Tape<T>::Var>& inputs,
    T dropout_rate, RngState& rng, bool train) {
  auto fwd = lstm_stack_run(tape, vars.fwd, inputs, false, dropout_rate, rng, train);
  auto bwd = lstm_stack_run(tape, vars.bwd, inputs, true, dropout_rate, rng, train);
  std::vector<typename Tape<T>::Var> out(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) out[t] = tape.concat2(fwd[t], bwd[t]);
  return out;
}

// ---------------------------------------------------------------------------
// Two-hidden-layer MLP with a 5-way linear head. Dropout follows each ReLU.
// ---------------------------------------------------------------------------

template <typename T>
struct MlpParams {
  Param<T>*W0, *b0, *W1, *b1, *Wout, *bout;
};

template <typename T>
inline MlpParams<T> add_mlp(ParamStore<T>& store, const std::string& prefix, int input,
                            int hidden, int out, RngState& rng) {
  MlpParams<T> mlp;
  mlp.W0 = &store.add(prefix + ".l0.W", {hidden, input});
  mlp.b0 = &store.add(prefix + ".l0.b", {hidden});
  mlp.W1 = &store.add(prefix + ".l1.W", {hidden, hidden});
  mlp.b1 = &store.add(prefix + ".l1.b", {hidden});
  mlp.Wout = &store.add(prefix + ".out.W", {out, hidden});
  mlp.bout = &store.add(prefix + ".out.b", {out});
  init_uniform(mlp.W0->value, input, rng);
  init_uniform(mlp.W1->value, hidden, rng);
  init_uniform(mlp.Wout->value, hidden, rng);
  return mlp;
}

template <typename T>
struct MlpVars {
  typename Tape<T>::Var W0, b0, W1, b1, Wout, bout;
};

template <typename T>
inline MlpVars<T> bind_mlp(Tape<T>& tape, const MlpParams<T>& p) {
  return {tape.leaf_ref(&p.W0->value, &p.W0->grad),   tape.leaf_ref(&p.b0->value, &p.b0->grad),
          tape.leaf_ref(&p.W1->value, &p.W1->grad),   tape.leaf_ref(&p.b1->value, &p.b1->grad),
          tape.leaf_ref(&p.Wout->value, &p.Wout->grad), tape.leaf_ref(&p.bout->value, &p.bout->grad)};
}

template <typename T>
inline typename Tape<T>::Var mlp_forward(Tape<T>& tape, const MlpVars<T>& mlp,
                                         typename Tape<T>::Var x, T dropout_rate, RngState& rng,
                                         bool train) {
  auto h0 = tape.relu(tape.add(tape.matvec(mlp.W0, x), mlp.b0));
  h0 = tape.dropout(h0, dropout_rate, rng, train);
  auto h1 = tape.relu(tape.add(tape.matvec(mlp.W1, h0), mlp.b1));
  h1 = tape.dropout(h1, dropout_rate, rng, train);
  return tape.add(tape.matvec(mlp.Wout, h1), mlp.bout);
}

// ---------------------------------------------------------------------------
// Softmax cross entropy built on the log-prob op: loss = -log p[target].
// `target` is a finger label in 1..5.
// ---------------------------------------------------------------------------

template <typename T>
inline typename Tape<T>::Var softmax_xent(Tape<T>& tape, typename Tape<T>::Var logits,
                                          int target, Tensor<T>* probs_out = nullptr) {
  return tape.scale(tape.log_prob(logits, target - 1, probs_out), T(-1));
}

// Plain softmax over raw logit values (decode paths).
template <typename T>
inline Tensor<T> softmax_values(const Tensor<T>& logits) {
  Tensor<T> probs = logits;
  T maxv = probs[0];
  for (std::size_t i = 1; i < probs.size(); ++i) maxv = std::max(maxv, probs[i]);
  T sum = 0;
  for (auto& v : probs.data) {
    v = std::exp(v - maxv);
    sum += v;
  }
  for (auto& v : probs.data) v /= sum;
  return probs;
}

}  // namespace pianofinger
