#include "dmem/controller.hpp"

namespace dmem {

namespace {

Tensor uniform_init(std::vector<size_t> shape, Rng& rng, double scale = 0.08) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

void register_lstm(const LstmParams& p, ParamStore& store, Rng& rng) {
  size_t ds = p.d_state, din = p.d_input;
  for (const char* gate : {"i", "f", "o", "g"}) {
    store.add(p.prefix + ".W" + gate, uniform_init({ds, ds + din}, rng));
    // Forget-gate bias starts at 1 so early training does not forget.
    double b0 = (gate[0] == 'f') ? 1.0 : 0.0;
    store.add(p.prefix + ".b" + gate, Tensor::full({ds}, b0));
  }
}

void register_gru(const GruParams& p, ParamStore& store, Rng& rng) {
  size_t ds = p.d_state, din = p.d_input;
  for (const char* gate : {"z", "r", "h"}) {
    store.add(p.prefix + ".W" + gate, uniform_init({ds, ds + din}, rng));
    store.add(p.prefix + ".b" + gate, Tensor::zeros({ds}));
  }
}

size_t lstm_param_size(size_t d_state, size_t d_input) {
  return 4 * (d_state * (d_state + d_input) + d_state);
}

size_t gru_param_size(size_t d_state, size_t d_input) {
  return 3 * (d_state * (d_state + d_input) + d_state);
}

LstmWeights bind_lstm(const Bound& bound, const std::string& prefix) {
  return LstmWeights{bound[prefix + ".Wi"], bound[prefix + ".Wf"], bound[prefix + ".Wo"],
                     bound[prefix + ".Wg"], bound[prefix + ".bi"], bound[prefix + ".bf"],
                     bound[prefix + ".bo"], bound[prefix + ".bg"]};
}

GruWeights bind_gru(const Bound& bound, const std::string& prefix) {
  return GruWeights{bound[prefix + ".Wz"], bound[prefix + ".Wr"], bound[prefix + ".Wh"],
                    bound[prefix + ".bz"], bound[prefix + ".br"], bound[prefix + ".bh"]};
}

ControllerState init_state(Tape& tape, CellType cell, size_t d_state) {
  if (d_state < 1) throw ShapeError("init_state: d_state must be positive");
  ControllerState s;
  s.hidden = tape.leaf(Tensor::zeros({d_state}));
  if (cell == CellType::kLstm) s.cell = tape.leaf(Tensor::zeros({d_state}));
  return s;
}

ControllerState lstm_step(Tape& tape, const LstmWeights& w, const ControllerState& state, Var input) {
  if (!state.cell) throw ContractError("lstm_step: state has no cell component");
  Var hx = tape.concat(state.hidden, input);
  Var i = tape.sigmoid(tape.affine(w.w_i, hx, w.b_i));
  Var f = tape.sigmoid(tape.affine(w.w_f, hx, w.b_f));
  Var o = tape.sigmoid(tape.affine(w.w_o, hx, w.b_o));
  Var g = tape.tanh(tape.affine(w.w_g, hx, w.b_g));
  Var c = tape.add(tape.mul(f, *state.cell), tape.mul(i, g));
  Var h = tape.mul(o, tape.tanh(c));
  return ControllerState{h, c};
}

ControllerState gru_step(Tape& tape, const GruWeights& w, const ControllerState& state, Var input) {
  Var hx = tape.concat(state.hidden, input);
  Var z = tape.sigmoid(tape.affine(w.w_z, hx, w.b_z));
  Var r = tape.sigmoid(tape.affine(w.w_r, hx, w.b_r));
  Var rhx = tape.concat(tape.mul(r, state.hidden), input);
  Var cand = tape.tanh(tape.affine(w.w_h, rhx, w.b_h));
  Var one = tape.leaf(Tensor::scalar(1.0));
  Var keep = tape.mul(tape.sub(one, z), state.hidden);
  Var h = tape.add(keep, tape.mul(z, cand));
  return ControllerState{h, std::nullopt};
}

}  // namespace dmem
