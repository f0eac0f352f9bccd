#pragma once

#include <optional>
#include <vector>

#include "dmem/controller.hpp"
#include "dmem/params.hpp"
#include "dmem/tensor.hpp"

namespace dmem {

// An N×d array of location vectors living on a tape. Writing and reading are
// separated by a state machine: reads are only served once the memory is
// sealed, and a location written with location addressing stays fixed.
class MemoryMat {
 public:
  enum class State { kWriting, kSealed };

  MemoryMat(int layer_id, size_t n, size_t d)
      : layer_id_(layer_id), d_(d), rows_(n), written_(n, false), state_(State::kWriting) {
    if (n < 1) throw ShapeError("MemoryMat: needs at least one location");
  }

  // Builds an already-sealed memory from existing rows (embeddings, bundles).
  static MemoryMat sealed(int layer_id, size_t d, std::vector<Var> rows);

  int layer_id() const { return layer_id_; }
  size_t n_locations() const { return rows_.size(); }
  size_t dim() const { return d_; }
  State state() const { return state_; }

  Var row(size_t t) const;                       // sealed access only
  void write_row(size_t t, Var value);           // location write, once per slot
  void overwrite_row(size_t t, Var value);       // content-write update path
  Var current_row(size_t t) const;               // writing-phase access (content write)
  void prefill(const std::vector<Var>& rows);    // content-write initial values
  void seal();

 private:
  int layer_id_;
  size_t d_;
  std::vector<Var> rows_;
  std::vector<bool> written_;
  State state_;
};

enum class ReadMode { kLocation, kContent };
enum class WriteMode { kLocation, kContent };

// Gating / write networks are 1-hidden-layer tanh MLPs bound into the tape.
struct MlpWeights {
  Var w1, b1, w2, b2;
};

struct MlpParams {
  std::string prefix;
  size_t d_in = 0, d_hidden = 0, d_out = 0;
};

void register_mlp(const MlpParams& p, ParamStore& store, Rng& rng);
size_t mlp_param_size(size_t d_in, size_t d_hidden, size_t d_out);
MlpWeights bind_mlp(const Bound& bound, const std::string& prefix);

// Scalar affiliation score g(s, x) of one location against the state.
Var gate_score(Tape& tape, const MlpWeights& gate, Var state, Var location);

// Write vector F_W(s): tanh MLP so memory values stay bounded.
Var write_vector(Tape& tape, const MlpWeights& mlp, Var state);

// --- Read addressing ---

Var read_location(const MemoryMat& m, size_t t);

struct ContentRead {
  Var value;    // Σ w_n · x_n
  Var weights;  // softmax-normalized affiliation weights, kept for inspection
};

ContentRead read_content(Tape& tape, const MemoryMat& m, Var state, const MlpWeights& gate);

// Hybrid read: [location return ; content return]. The two sub-heads may
// target different memories (Short-Cut).
struct HybridRead {
  Var value;
  Var content_weights;
};

HybridRead read_hybrid(Tape& tape, const MemoryMat& loc_mem, size_t t, const MemoryMat& content_mem,
                       Var state, const MlpWeights& gate);

// --- Write addressing ---

void write_location(Tape& tape, MemoryMat& m, size_t t, Var state, const MlpWeights& write_mlp);

struct ContentWriteHead {
  MlpWeights write_mlp;   // F_W
  MlpWeights gate;        // per-location write scores
  Var alpha_w, alpha_b;   // scalar forgetting-factor head on s_t
};

struct ContentWriteTrace {
  Var weights;  // normalized write weights g̃ at this step
  Var alpha;    // forgetting factor α_t
};

// Convex per-location update: x_n ← (1−α·g̃_n)·x_n + α·g̃_n·F_W(s).
ContentWriteTrace write_content(Tape& tape, MemoryMat& m, Var state, const ContentWriteHead& head);

// --- Full single-layer transformation ---

struct BoundReadHead {
  ReadMode mode;
  const MemoryMat* source = nullptr;
  std::optional<MlpWeights> gate;  // content mode only
};

struct BoundLayer {
  std::vector<BoundReadHead> reads;  // location head (if any) sets the tempo
  WriteMode write_mode = WriteMode::kLocation;
  MlpWeights write_mlp;
  std::optional<MlpWeights> write_mlp_bwd;  // bidirectional variant
  std::optional<MlpWeights> write_gate;         // content write
  std::optional<std::pair<Var, Var>> alpha;     // content write: {w, b}
  LstmWeights controller;
  std::optional<LstmWeights> controller_bwd;    // bidirectional variant
  bool bidirectional = false;
  size_t d_state = 0;
  size_t d_out = 0;                              // memory width written per direction
  std::vector<Var> init_rows;                    // content write: pre-filled W-memory rows
};

struct LayerRun {
  MemoryMat memory;
  // Per-timestep content weights of the first content-mode read head,
  // exported for the inspect hook. Empty when the layer has none.
  std::vector<std::vector<double>> attention;
};

// Runs the read→state-update→write loop over the tempo defined by the
// location head's source, then seals the result.
LayerRun run_layer(Tape& tape, const BoundLayer& layer, int out_layer_id);

}  // namespace dmem
