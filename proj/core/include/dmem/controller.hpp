#pragma once

#include <optional>
#include <string>

#include "dmem/params.hpp"
#include "dmem/tensor.hpp"

namespace dmem {

enum class CellType { kLstm, kGru };

// Recurrent controller state s_t. `cell` is present only for LSTM.
struct ControllerState {
  Var hidden;
  std::optional<Var> cell;
};

// Gate weights bound into a tape. Each gate matrix acts on [state; input].
struct LstmWeights {
  Var w_i, w_f, w_o, w_g;
  Var b_i, b_f, b_o, b_g;
};

struct GruWeights {
  Var w_z, w_r, w_h;
  Var b_z, b_r, b_h;
};

// Parameter-name layout for one cell instance; `prefix` scopes the names.
struct LstmParams {
  std::string prefix;
  size_t d_state = 0;
  size_t d_input = 0;
};

struct GruParams {
  std::string prefix;
  size_t d_state = 0;
  size_t d_input = 0;
};

void register_lstm(const LstmParams& p, ParamStore& store, Rng& rng);
void register_gru(const GruParams& p, ParamStore& store, Rng& rng);
size_t lstm_param_size(size_t d_state, size_t d_input);
size_t gru_param_size(size_t d_state, size_t d_input);

LstmWeights bind_lstm(const Bound& bound, const std::string& prefix);
GruWeights bind_gru(const Bound& bound, const std::string& prefix);

ControllerState init_state(Tape& tape, CellType cell, size_t d_state);

// Standard LSTM recurrence: sigmoid input/forget/output gates, tanh
// candidate; c' = f⊙c + i⊙g, h' = o⊙tanh(c').
ControllerState lstm_step(Tape& tape, const LstmWeights& w, const ControllerState& state, Var input);

// Standard GRU recurrence: h' = (1−z)⊙h + z⊙h̃ with h̃ = tanh(W·[r⊙h; x]).
ControllerState gru_step(Tape& tape, const GruWeights& w, const ControllerState& state, Var input);

}  // namespace dmem
