#include "dmem/memory.hpp"

#include <cmath>

namespace dmem {

MemoryMat MemoryMat::sealed(int layer_id, size_t d, std::vector<Var> rows) {
  MemoryMat m(layer_id, rows.size(), d);
  m.rows_ = std::move(rows);
  std::fill(m.written_.begin(), m.written_.end(), true);
  m.state_ = State::kSealed;
  return m;
}

Var MemoryMat::row(size_t t) const {
  if (state_ != State::kSealed)
    throw StateError("MemoryMat: reading requires a sealed memory (layer " +
                     std::to_string(layer_id_) + ")");
  if (t >= rows_.size()) throw IndexError("MemoryMat: location index out of range");
  return rows_[t];
}

void MemoryMat::write_row(size_t t, Var value) {
  if (state_ != State::kWriting) throw StateError("MemoryMat: write to sealed memory");
  if (t >= rows_.size()) throw IndexError("MemoryMat: location index out of range");
  if (written_[t]) throw ContractError("MemoryMat: double write to location " + std::to_string(t));
  rows_[t] = value;
  written_[t] = true;
}

void MemoryMat::overwrite_row(size_t t, Var value) {
  if (state_ != State::kWriting) throw StateError("MemoryMat: write to sealed memory");
  if (t >= rows_.size()) throw IndexError("MemoryMat: location index out of range");
  if (!written_[t]) throw ContractError("MemoryMat: overwrite of uninitialized location");
  rows_[t] = value;
}

Var MemoryMat::current_row(size_t t) const {
  if (t >= rows_.size()) throw IndexError("MemoryMat: location index out of range");
  if (!rows_[t].valid()) throw ContractError("MemoryMat: location not yet initialized");
  return rows_[t];
}

void MemoryMat::prefill(const std::vector<Var>& rows) {
  if (state_ != State::kWriting) throw StateError("MemoryMat: prefill on sealed memory");
  if (rows.size() != rows_.size()) throw ShapeError("MemoryMat: prefill row count mismatch");
  rows_ = rows;
  std::fill(written_.begin(), written_.end(), true);
}

void MemoryMat::seal() {
  if (state_ == State::kSealed) throw StateError("MemoryMat: already sealed");
  for (size_t t = 0; t < rows_.size(); ++t)
    if (!written_[t]) throw ContractError("MemoryMat: sealing with unwritten location " + std::to_string(t));
  state_ = State::kSealed;
}

void register_mlp(const MlpParams& p, ParamStore& store, Rng& rng) {
  // Fan-scaled (Glorot) limits keep activations and gradients at a healthy
  // magnitude through the tanh stack; a fixed small range starves the
  // addressing networks of signal.
  auto glorot = [&rng](size_t fan_out, size_t fan_in) {
    Tensor t = Tensor::zeros({fan_out, fan_in});
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
  };
  store.add(p.prefix + ".W1", glorot(p.d_hidden, p.d_in));
  store.add(p.prefix + ".b1", Tensor::zeros({p.d_hidden}));
  store.add(p.prefix + ".W2", glorot(p.d_out, p.d_hidden));
  store.add(p.prefix + ".b2", Tensor::zeros({p.d_out}));
}

size_t mlp_param_size(size_t d_in, size_t d_hidden, size_t d_out) {
  return d_hidden * d_in + d_hidden + d_out * d_hidden + d_out;
}

MlpWeights bind_mlp(const Bound& bound, const std::string& prefix) {
  return MlpWeights{bound[prefix + ".W1"], bound[prefix + ".b1"], bound[prefix + ".W2"],
                    bound[prefix + ".b2"]};
}

Var gate_score(Tape& tape, const MlpWeights& gate, Var state, Var location) {
  Var in = tape.concat(state, location);
  Var hidden = tape.tanh(tape.affine(gate.w1, in, gate.b1));
  Var out = tape.affine(gate.w2, hidden, gate.b2);  // shape {1}
  return out;
}

Var write_vector(Tape& tape, const MlpWeights& mlp, Var state) {
  Var hidden = tape.tanh(tape.affine(mlp.w1, state, mlp.b1));
  return tape.tanh(tape.affine(mlp.w2, hidden, mlp.b2));
}

Var read_location(const MemoryMat& m, size_t t) { return m.row(t); }

ContentRead read_content(Tape& tape, const MemoryMat& m, Var state, const MlpWeights& gate) {
  size_t n = m.n_locations();
  std::vector<Var> scores;
  scores.reserve(n);
  for (size_t i = 0; i < n; ++i) scores.push_back(gate_score(tape, gate, state, m.row(i)));
  Var weights = tape.softmax(tape.stack(scores));
  Var acc = tape.mul(m.row(0), tape.pick(weights, 0));
  for (size_t i = 1; i < n; ++i)
    acc = tape.add(acc, tape.mul(m.row(i), tape.pick(weights, i)));
  return ContentRead{acc, weights};
}

HybridRead read_hybrid(Tape& tape, const MemoryMat& loc_mem, size_t t, const MemoryMat& content_mem,
                       Var state, const MlpWeights& gate) {
  Var loc = read_location(loc_mem, t);
  ContentRead c = read_content(tape, content_mem, state, gate);
  return HybridRead{tape.concat(loc, c.value), c.weights};
}

void write_location(Tape& tape, MemoryMat& m, size_t t, Var state, const MlpWeights& write_mlp) {
  m.write_row(t, write_vector(tape, write_mlp, state));
}

ContentWriteTrace write_content(Tape& tape, MemoryMat& m, Var state, const ContentWriteHead& head) {
  if (m.state() != MemoryMat::State::kWriting)
    throw StateError("write_content: memory already sealed");
  size_t n = m.n_locations();
  std::vector<Var> scores;
  scores.reserve(n);
  for (size_t i = 0; i < n; ++i)
    scores.push_back(gate_score(tape, head.gate, state, m.current_row(i)));
  Var weights = tape.softmax(tape.stack(scores));
  Var alpha = tape.sigmoid(tape.add(tape.pick(tape.matvec(head.alpha_w, state), 0), head.alpha_b));
  Var v = write_vector(tape, head.write_mlp, state);
  Var one = tape.leaf(Tensor::scalar(1.0));
  for (size_t i = 0; i < n; ++i) {
    Var ag = tape.mul(alpha, tape.pick(weights, i));
    Var keep = tape.mul(tape.sub(one, ag), m.current_row(i));
    m.overwrite_row(i, tape.add(keep, tape.mul(ag, v)));
  }
  return ContentWriteTrace{weights, alpha};
}

namespace {

struct StepRead {
  Var value;
  std::optional<Var> content_weights;
};

StepRead read_heads(Tape& tape, const std::vector<BoundReadHead>& heads, Var state, size_t t,
                    bool reversed, size_t tempo) {
  StepRead out;
  for (const BoundReadHead& h : heads) {
    Var part;
    if (h.mode == ReadMode::kLocation) {
      size_t idx = reversed ? tempo - 1 - t : t;
      part = read_location(*h.source, idx);
    } else {
      ContentRead c = read_content(tape, *h.source, state, *h.gate);
      part = c.value;
      if (!out.content_weights) out.content_weights = c.weights;
    }
    out.value = out.value.valid() ? tape.concat(out.value, part) : part;
  }
  return out;
}

}  // namespace

LayerRun run_layer(Tape& tape, const BoundLayer& layer, int out_layer_id) {
  const BoundReadHead* tempo_head = nullptr;
  for (const BoundReadHead& h : layer.reads)
    if (h.mode == ReadMode::kLocation) {
      tempo_head = &h;
      break;
    }
  if (!tempo_head)
    throw ContractError("run_layer: a location-mode read head must set the tempo");
  size_t tempo = tempo_head->source->n_locations();

  size_t out_dim = layer.bidirectional ? 2 * layer.d_out : layer.d_out;
  std::vector<std::vector<double>> attention;

  if (layer.write_mode == WriteMode::kContent) {
    if (layer.bidirectional) throw ContractError("run_layer: bidirectional content write unsupported");
    if (layer.init_rows.empty())
      throw ShapeError("run_layer: content write needs pre-filled locations");
    MemoryMat mem(out_layer_id, layer.init_rows.size(), out_dim);
    mem.prefill(layer.init_rows);
    ContentWriteHead head{layer.write_mlp, *layer.write_gate, layer.alpha->first,
                          layer.alpha->second};
    ControllerState s = init_state(tape, CellType::kLstm, layer.d_state);
    for (size_t t = 0; t < tempo; ++t) {
      StepRead r = read_heads(tape, layer.reads, s.hidden, t, false, tempo);
      s = lstm_step(tape, layer.controller, s, r.value);
      ContentWriteTrace trace = write_content(tape, mem, s.hidden, head);
      attention.push_back(tape.val(trace.weights).data);
    }
    mem.seal();
    return LayerRun{std::move(mem), std::move(attention)};
  }

  // Location write: forward pass, plus a reversed pass when bidirectional.
  MemoryMat mem(out_layer_id, tempo, out_dim);
  std::vector<Var> fwd(tempo), bwd;
  {
    ControllerState s = init_state(tape, CellType::kLstm, layer.d_state);
    for (size_t t = 0; t < tempo; ++t) {
      StepRead r = read_heads(tape, layer.reads, s.hidden, t, false, tempo);
      s = lstm_step(tape, layer.controller, s, r.value);
      fwd[t] = write_vector(tape, layer.write_mlp, s.hidden);
      if (r.content_weights) attention.push_back(tape.val(*r.content_weights).data);
    }
  }
  if (layer.bidirectional) {
    if (!layer.controller_bwd || !layer.write_mlp_bwd)
      throw ContractError("run_layer: bidirectional layer missing backward parameters");
    bwd.resize(tempo);
    ControllerState s = init_state(tape, CellType::kLstm, layer.d_state);
    for (size_t t = 0; t < tempo; ++t) {
      StepRead r = read_heads(tape, layer.reads, s.hidden, t, true, tempo);
      s = lstm_step(tape, *layer.controller_bwd, s, r.value);
      bwd[tempo - 1 - t] = write_vector(tape, *layer.write_mlp_bwd, s.hidden);
    }
  }
  for (size_t t = 0; t < tempo; ++t) {
    Var row = layer.bidirectional ? tape.concat(fwd[t], bwd[t]) : fwd[t];
    mem.write_row(t, row);
  }
  mem.seal();
  return LayerRun{std::move(mem), std::move(attention)};
}

}  // namespace dmem
