#include "dmem/architecture.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dmem/tokens.hpp"

namespace dmem {

namespace {

const char* kPresetNames[] = {"rnnsearch", "arc1_loc", "arc1_hyb", "arc2", "arc3", "arc4"};

std::string layer_prefix(int id) { return "layer" + std::to_string(id); }

}  // namespace

Preset preset_from_string(const std::string& name) {
  for (size_t i = 0; i < std::size(kPresetNames); ++i)
    if (name == kPresetNames[i]) return static_cast<Preset>(i);
  throw DomainError("unknown preset: " + name);
}

std::string preset_name(Preset p) { return kPresetNames[static_cast<size_t>(p)]; }

const std::vector<Preset>& all_presets() {
  static const std::vector<Preset> kAll = {Preset::kRnnSearch, Preset::kArc1Loc, Preset::kArc1Hyb,
                                           Preset::kArc2,      Preset::kArc3,    Preset::kArc4};
  return kAll;
}

ArchSpec build_preset(Preset p, Dims dims, size_t src_vocab, size_t tgt_vocab) {
  if (dims.d_emb < 1 || dims.d_s < 1 || dims.d_mem < 1)
    throw DomainError("build_preset: dimensions must be positive");
  ArchSpec spec;
  spec.preset = preset_name(p);
  spec.dims = dims;
  spec.src_vocab = src_vocab;
  spec.tgt_vocab = tgt_vocab;

  auto l_read = [](MemRef src) { return ReadHeadSpec{ReadMode::kLocation, src}; };
  auto c_read = [](MemRef src) { return ReadHeadSpec{ReadMode::kContent, src}; };
  MemRef l1 = MemRef::layer(1);
  MemRef l2 = MemRef::layer(2);

  // Layer-2 is the same L-read/L-write transformation in every preset;
  // rnnsearch alone runs it bidirectionally.
  switch (p) {
    case Preset::kRnnSearch:
      spec.layers.push_back({2, {l_read(l1)}, WriteMode::kLocation, true, std::nullopt});
      spec.output.read_source = l2;
      break;
    case Preset::kArc1Loc:
      spec.layers.push_back({2, {l_read(l1)}, WriteMode::kLocation, false, std::nullopt});
      spec.layers.push_back({3, {l_read(l2)}, WriteMode::kLocation, false, std::nullopt});
      spec.bundles.push_back({101, {2, 3}});
      spec.output.read_source = MemRef::bundle(101);
      break;
    case Preset::kArc1Hyb:
      spec.layers.push_back({2, {l_read(l1)}, WriteMode::kLocation, false, std::nullopt});
      spec.layers.push_back({3, {l_read(l2), c_read(l2)}, WriteMode::kLocation, false, std::nullopt});
      spec.bundles.push_back({101, {2, 3}});
      spec.output.read_source = MemRef::bundle(101);
      break;
    case Preset::kArc2:
      spec.layers.push_back({2, {l_read(l1)}, WriteMode::kLocation, false, std::nullopt});
      spec.layers.push_back({3, {l_read(l1), c_read(l2)}, WriteMode::kLocation, false, std::nullopt});
      spec.bundles.push_back({101, {2, 3}});
      spec.output.read_source = MemRef::bundle(101);
      break;
    case Preset::kArc3:
      spec.layers.push_back({2, {l_read(l1)}, WriteMode::kLocation, false, std::nullopt});
      spec.layers.push_back({3, {l_read(l1), c_read(l2)}, WriteMode::kLocation, false, std::nullopt});
      spec.bundles.push_back({101, {2, 3}});
      spec.layers.push_back(
          {4, {l_read(l1), c_read(MemRef::bundle(101))}, WriteMode::kLocation, false, std::nullopt});
      spec.bundles.push_back({102, {2, 3, 4}});
      spec.output.read_source = MemRef::bundle(102);
      break;
    case Preset::kArc4:
      spec.layers.push_back({2, {l_read(l1)}, WriteMode::kLocation, false, std::nullopt});
      spec.layers.push_back({3, {l_read(l2)}, WriteMode::kContent, false, std::nullopt});
      spec.bundles.push_back({101, {2, 3}});
      spec.output.read_source = MemRef::bundle(101);
      break;
  }
  return spec;
}

size_t mem_dim(const ArchSpec& spec, MemRef ref) {
  if (ref.kind == MemRef::Kind::kLayer) {
    if (ref.id == 1) return spec.dims.d_emb;
    for (const LayerSpecA& l : spec.layers)
      if (l.id == ref.id) return l.bidirectional ? 2 * spec.dims.d_mem : spec.dims.d_mem;
    throw DomainError("mem_dim: unknown layer " + std::to_string(ref.id));
  }
  for (const BundleSpec& b : spec.bundles)
    if (b.id == ref.id) {
      size_t d = 0;
      for (int m : b.members) d += mem_dim(spec, MemRef::layer(m));
      return d;
    }
  throw DomainError("mem_dim: unknown bundle " + std::to_string(ref.id));
}

namespace {

// Structural length symbol for alignment checking: -1 means "source length",
// a nonnegative value is a fixed location count. The visited set guards
// against read cycles in malformed specs (reported as read-above-write).
long length_symbol(const ArchSpec& spec, int layer_id, std::set<int>& visited) {
  if (layer_id == 1 || !visited.insert(layer_id).second) return -1;
  for (const LayerSpecA& l : spec.layers)
    if (l.id == layer_id) {
      if (l.fixed_len) return static_cast<long>(*l.fixed_len);
      for (const ReadHeadSpec& h : l.reads)
        if (h.mode == ReadMode::kLocation && h.source.kind == MemRef::Kind::kLayer)
          return length_symbol(spec, h.source.id, visited);
      return -1;
    }
  return -1;
}

long length_symbol(const ArchSpec& spec, int layer_id) {
  std::set<int> visited;
  return length_symbol(spec, layer_id, visited);
}

int effective_level(const ArchSpec& spec, MemRef ref) {
  if (ref.kind == MemRef::Kind::kLayer) return ref.id;
  for (const BundleSpec& b : spec.bundles) {
    if (b.id != ref.id) continue;
    int lvl = 0;
    for (int m : b.members) lvl = std::max(lvl, m);
    return lvl;
  }
  return 1 << 20;  // unknown bundle; reported separately
}

bool ref_exists(const ArchSpec& spec, MemRef ref) {
  if (ref.kind == MemRef::Kind::kLayer) {
    if (ref.id == 1) return true;
    for (const LayerSpecA& l : spec.layers)
      if (l.id == ref.id) return true;
    return false;
  }
  for (const BundleSpec& b : spec.bundles)
    if (b.id == ref.id) return true;
  return false;
}

}  // namespace

std::vector<std::string> validate(const ArchSpec& spec) {
  std::vector<std::string> v;
  auto complain = [&v](std::string msg) { v.push_back(std::move(msg)); };

  std::set<int> layer_ids{1};
  int prev = 1;
  for (const LayerSpecA& l : spec.layers) {
    if (l.id <= prev) complain("layer ids must be strictly increasing, got " + std::to_string(l.id));
    prev = l.id;
    layer_ids.insert(l.id);
  }

  for (const BundleSpec& b : spec.bundles) {
    for (int m : b.members)
      if (!layer_ids.count(m))
        complain("bundle " + std::to_string(b.id) + ": unknown member layer " + std::to_string(m));
    if (b.members.size() >= 2) {
      long sym = length_symbol(spec, b.members[0]);
      for (size_t i = 1; i < b.members.size(); ++i)
        if (length_symbol(spec, b.members[i]) != sym)
          complain("bundle " + std::to_string(b.id) + ": members " + std::to_string(b.members[0]) +
                   " and " + std::to_string(b.members[i]) + " are not length-aligned");
    }
  }

  for (const LayerSpecA& l : spec.layers) {
    size_t loc_heads = 0;
    for (const ReadHeadSpec& h : l.reads) {
      if (!ref_exists(spec, h.source)) {
        complain("layer " + std::to_string(l.id) + ": read source does not exist");
        continue;
      }
      if (effective_level(spec, h.source) >= l.id)
        complain("layer " + std::to_string(l.id) +
                 ": read-above-write (source level >= " + std::to_string(l.id) + ")");
      if (h.mode == ReadMode::kLocation) ++loc_heads;
    }
    if (loc_heads != 1)
      complain("layer " + std::to_string(l.id) + ": exactly one location-mode read head required");
    if (l.bidirectional) {
      if (l.write_mode != WriteMode::kLocation || l.reads.size() != 1 ||
          l.reads[0].mode != ReadMode::kLocation)
        complain("layer " + std::to_string(l.id) + ": bidirectional requires a pure L/L layer");
    }
    if (l.fixed_len && l.write_mode != WriteMode::kContent)
      complain("layer " + std::to_string(l.id) + ": fixed length only applies to content writes");
  }

  if (!ref_exists(spec, spec.output.read_source))
    complain("output: read source does not exist");
  if (spec.src_vocab < kNumSpecials || spec.tgt_vocab < kNumSpecials)
    complain("vocabulary must include the special symbols");
  return v;
}

namespace {

size_t layer_input_dim(const ArchSpec& spec, const LayerSpecA& l) {
  size_t d = 0;
  for (const ReadHeadSpec& h : l.reads) d += mem_dim(spec, h.source);
  return d;
}

}  // namespace

void init_params(const ArchSpec& spec, ParamStore& store, Rng& rng) {
  auto uni = [](std::vector<size_t> shape, Rng& r) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = r.uniform(-0.08, 0.08);
    return t;
  };

  // Embedding rows at unit-ish norm (rms 1/√d); the recurrent gate weights
  // keep the conventional small uniform range.
  auto emb_init = [&](size_t vocab, Rng& r) {
    Tensor t = Tensor::zeros({vocab, spec.dims.d_emb});
    double limit = std::sqrt(3.0 / static_cast<double>(spec.dims.d_emb));
    for (double& v : t.data) v = r.uniform(-limit, limit);
    return t;
  };
  Rng r_emb = rng.split("emb");
  store.add("emb.src", emb_init(spec.src_vocab, r_emb));
  store.add("emb.tgt", emb_init(spec.tgt_vocab, r_emb));

  for (const LayerSpecA& l : spec.layers) {
    std::string pfx = layer_prefix(l.id);
    Rng r_layer = rng.split(pfx);
    size_t d_in = layer_input_dim(spec, l);
    register_lstm({pfx + ".fwd", spec.dims.d_s, d_in}, store, r_layer);
    if (l.bidirectional) register_lstm({pfx + ".bwd", spec.dims.d_s, d_in}, store, r_layer);
    int head_idx = 0;
    for (const ReadHeadSpec& h : l.reads) {
      if (h.mode == ReadMode::kContent) {
        size_t d_src = mem_dim(spec, h.source);
        register_mlp({pfx + ".read" + std::to_string(head_idx) + ".gate",
                      spec.dims.d_s + d_src, spec.dims.d_s, 1},
                     store, r_layer);
      }
      ++head_idx;
    }
    register_mlp({pfx + ".write.mlp", spec.dims.d_s, spec.dims.d_s, spec.dims.d_mem}, store,
                 r_layer);
    if (l.bidirectional)
      register_mlp({pfx + ".write.bwd", spec.dims.d_s, spec.dims.d_s, spec.dims.d_mem}, store,
                   r_layer);
    if (l.write_mode == WriteMode::kContent) {
      register_mlp({pfx + ".write.gate", spec.dims.d_s + spec.dims.d_mem, spec.dims.d_s, 1}, store,
                   r_layer);
      store.add(pfx + ".write.alpha.w", uni({1, spec.dims.d_s}, r_layer));
      store.add(pfx + ".write.alpha.b", Tensor::zeros({1}));
    }
  }

  Rng r_out = rng.split("output");
  size_t d_top = mem_dim(spec, spec.output.read_source);
  register_gru({"out.gru", spec.dims.d_s, spec.dims.d_emb + d_top}, store, r_out);
  register_mlp({"out.read.gate", spec.dims.d_s + d_top, spec.dims.d_s, 1}, store, r_out);
  {
    Tensor w = Tensor::zeros({spec.tgt_vocab, spec.dims.d_s});
    double limit = std::sqrt(6.0 / static_cast<double>(spec.tgt_vocab + spec.dims.d_s));
    for (double& v : w.data) v = r_out.uniform(-limit, limit);
    store.add("out.proj.W", std::move(w));
  }
  store.add("out.proj.b", Tensor::zeros({spec.tgt_vocab}));
}

size_t param_count(const ArchSpec& spec) {
  ParamStore tmp;
  Rng rng(0);
  init_params(spec, tmp, rng);
  return tmp.total_size();
}

const MemoryMat& EncodeResult::get(MemRef ref) const {
  const auto& m = (ref.kind == MemRef::Kind::kLayer) ? layers : bundles;
  auto it = m.find(ref.id);
  if (it == m.end()) throw ContractError("EncodeResult: memory not materialized");
  return it->second;
}

MemoryMat bundle_memories(Tape& tape, int bundle_id, const std::vector<const MemoryMat*>& members) {
  if (members.empty()) throw DomainError("bundle: no members");
  size_t n = members[0]->n_locations();
  size_t d = 0;
  for (const MemoryMat* m : members) {
    if (m->state() != MemoryMat::State::kSealed) throw StateError("bundle: member not sealed");
    if (m->n_locations() != n)
      throw ShapeError("bundle: member location counts differ (" + std::to_string(n) + " vs " +
                       std::to_string(m->n_locations()) + ")");
    d += m->dim();
  }
  std::vector<Var> rows(n);
  for (size_t t = 0; t < n; ++t) {
    Var row = members[0]->row(t);
    for (size_t k = 1; k < members.size(); ++k) row = tape.concat(row, members[k]->row(t));
    rows[t] = row;
  }
  return MemoryMat::sealed(bundle_id, d, rows);
}

namespace {

// Materializes a bundle into `enc` on first use.
const MemoryMat& resolve(Tape& tape, const ArchSpec& spec, EncodeResult& enc, MemRef ref) {
  if (ref.kind == MemRef::Kind::kLayer) {
    auto it = enc.layers.find(ref.id);
    if (it == enc.layers.end())
      throw ContractError("encode: layer " + std::to_string(ref.id) + " not yet formed");
    return it->second;
  }
  auto it = enc.bundles.find(ref.id);
  if (it != enc.bundles.end()) return it->second;
  for (const BundleSpec& b : spec.bundles) {
    if (b.id != ref.id) continue;
    std::vector<const MemoryMat*> members;
    for (int m : b.members) members.push_back(&enc.layers.at(m));
    auto [pos, ok] = enc.bundles.emplace(b.id, bundle_memories(tape, b.id, members));
    return pos->second;
  }
  throw ContractError("encode: unknown bundle " + std::to_string(ref.id));
}

BoundLayer bind_layer(Tape& tape, const Bound& bound, const ArchSpec& spec, EncodeResult& enc,
                      const LayerSpecA& l) {
  std::string pfx = layer_prefix(l.id);
  BoundLayer bl;
  bl.write_mode = l.write_mode;
  bl.bidirectional = l.bidirectional;
  bl.d_state = spec.dims.d_s;
  bl.d_out = spec.dims.d_mem;
  bl.controller = bind_lstm(bound, pfx + ".fwd");
  if (l.bidirectional) bl.controller_bwd = bind_lstm(bound, pfx + ".bwd");
  bl.write_mlp = bind_mlp(bound, pfx + ".write.mlp");
  if (l.bidirectional) bl.write_mlp_bwd = bind_mlp(bound, pfx + ".write.bwd");
  int head_idx = 0;
  for (const ReadHeadSpec& h : l.reads) {
    BoundReadHead bh;
    bh.mode = h.mode;
    bh.source = &resolve(tape, spec, enc, h.source);
    if (h.mode == ReadMode::kContent)
      bh.gate = bind_mlp(bound, pfx + ".read" + std::to_string(head_idx) + ".gate");
    bl.reads.push_back(bh);
    ++head_idx;
  }
  if (l.write_mode == WriteMode::kContent) {
    bl.write_gate = bind_mlp(bound, pfx + ".write.gate");
    bl.alpha = {bound[pfx + ".write.alpha.w"], bound[pfx + ".write.alpha.b"]};
    size_t tempo = 0;
    for (const BoundReadHead& bh : bl.reads)
      if (bh.mode == ReadMode::kLocation) tempo = bh.source->n_locations();
    size_t n_w = l.fixed_len.value_or(tempo);
    Rng r(spec.content_init_seed + static_cast<uint64_t>(l.id));
    for (size_t i = 0; i < n_w; ++i) {
      Tensor init = Tensor::zeros({spec.dims.d_mem});
      for (double& vv : init.data) vv = r.gaussian(0.0, 0.1);
      bl.init_rows.push_back(tape.leaf(std::move(init)));
    }
  }
  return bl;
}

}  // namespace

EncodeResult encode(Tape& tape, const Bound& bound, const ArchSpec& spec,
                    const std::vector<int>& src_ids) {
  if (src_ids.empty()) throw DomainError("encode: empty source");
  for (int id : src_ids)
    if (id < 0 || static_cast<size_t>(id) >= spec.src_vocab)
      throw DomainError("encode: token id out of vocabulary range");

  EncodeResult enc;
  Var emb = bound["emb.src"];
  std::vector<Var> rows;
  rows.reserve(src_ids.size());
  for (int id : src_ids) rows.push_back(tape.row(emb, static_cast<size_t>(id)));
  enc.layers.emplace(1, MemoryMat::sealed(1, spec.dims.d_emb, std::move(rows)));

  for (const LayerSpecA& l : spec.layers) {
    BoundLayer bl = bind_layer(tape, bound, spec, enc, l);
    if (l.write_mode == WriteMode::kContent && l.fixed_len) {
      // run_layer sizes the memory by tempo; fixed-length content memories
      // are handled by resizing the init rows above, so lengths must match.
      if (bl.init_rows.size() != l.fixed_len)
        throw ShapeError("encode: fixed-length content memory misconfigured");
    }
    LayerRun run = run_layer(tape, bl, l.id);
    if (!run.attention.empty()) enc.attention[l.id] = std::move(run.attention);
    enc.layers.emplace(l.id, std::move(run.memory));
  }
  resolve(tape, spec, enc, spec.output.read_source);
  return enc;
}

TrainLoss decode_train(Tape& tape, const Bound& bound, const ArchSpec& spec,
                       const EncodeResult& enc, const std::vector<int>& tgt_ids) {
  if (tgt_ids.empty() || tgt_ids.back() != kEosId)
    throw ContractError("decode_train: target must be nonempty and end with EOS");
  const MemoryMat& top = enc.get(spec.output.read_source);
  GruWeights gru = bind_gru(bound, "out.gru");
  MlpWeights gate = bind_mlp(bound, "out.read.gate");
  Var proj_w = bound["out.proj.W"];
  Var proj_b = bound["out.proj.b"];
  Var tgt_emb = bound["emb.tgt"];

  ControllerState s = init_state(tape, CellType::kGru, spec.dims.d_s);
  int prev = kBosId;
  Var total;
  for (int tgt : tgt_ids) {
    if (tgt < 0 || static_cast<size_t>(tgt) >= spec.tgt_vocab)
      throw DomainError("decode_train: target id out of vocabulary range");
    ContentRead c = read_content(tape, top, s.hidden, gate);
    Var input = tape.concat(tape.row(tgt_emb, static_cast<size_t>(prev)), c.value);
    s = gru_step(tape, gru, s, input);
    Var logits = tape.affine(proj_w, s.hidden, proj_b);
    Var nll = tape.cross_entropy(logits, static_cast<size_t>(tgt));
    total = total.valid() ? tape.add(total, nll) : nll;
    prev = tgt;
  }
  Var mean = tape.mul(total, tape.leaf(Tensor::scalar(1.0 / static_cast<double>(tgt_ids.size()))));
  return TrainLoss{total, mean, tgt_ids.size()};
}

namespace {

std::vector<double> log_softmax_values(const Tensor& logits) {
  double mx = *std::max_element(logits.data.begin(), logits.data.end());
  double z = 0.0;
  for (double v : logits.data) z += std::exp(v - mx);
  double lz = std::log(z) + mx;
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = logits.data[i] - lz;
  return out;
}

}  // namespace

GreedyResult decode_greedy(const ArchSpec& spec, const ParamStore& params,
                           const std::vector<int>& src_ids, size_t max_len) {
  if (max_len < 1) throw DomainError("decode_greedy: max_len must be >= 1");
  Tape tape;
  Bound bound(tape, params);
  EncodeResult enc = encode(tape, bound, spec, src_ids);
  const MemoryMat& top = enc.get(spec.output.read_source);
  GruWeights gru = bind_gru(bound, "out.gru");
  MlpWeights gate = bind_mlp(bound, "out.read.gate");
  Var proj_w = bound["out.proj.W"];
  Var proj_b = bound["out.proj.b"];
  Var tgt_emb = bound["emb.tgt"];

  GreedyResult out;
  ControllerState s = init_state(tape, CellType::kGru, spec.dims.d_s);
  int prev = kBosId;
  for (size_t step = 0; step < max_len + 1; ++step) {
    ContentRead c = read_content(tape, top, s.hidden, gate);
    Var input = tape.concat(tape.row(tgt_emb, static_cast<size_t>(prev)), c.value);
    s = gru_step(tape, gru, s, input);
    const Tensor& logits = tape.val(tape.affine(proj_w, s.hidden, proj_b));
    size_t best = 0;
    for (size_t i = 1; i < logits.size(); ++i)
      if (logits.data[i] > logits.data[best]) best = i;
    out.attention.push_back(tape.val(c.weights).data);
    if (static_cast<int>(best) == kEosId) break;
    out.tokens.push_back(static_cast<int>(best));
    if (out.tokens.size() >= max_len) break;
    prev = static_cast<int>(best);
  }
  return out;
}

std::vector<int> decode_beam(const ArchSpec& spec, const ParamStore& params,
                             const std::vector<int>& src_ids, size_t width, size_t max_len) {
  if (width < 1) throw DomainError("decode_beam: width must be >= 1");
  Tape tape;
  Bound bound(tape, params);
  EncodeResult enc = encode(tape, bound, spec, src_ids);
  const MemoryMat& top = enc.get(spec.output.read_source);
  GruWeights gru = bind_gru(bound, "out.gru");
  MlpWeights gate = bind_mlp(bound, "out.read.gate");
  Var proj_w = bound["out.proj.W"];
  Var proj_b = bound["out.proj.b"];
  Var tgt_emb = bound["emb.tgt"];

  struct Beam {
    std::vector<int> tokens;
    double logprob = 0.0;
    ControllerState state;
    int prev = kBosId;
  };
  struct Finished {
    std::vector<int> tokens;
    double score;  // length-normalized
  };

  auto normalized = [](double lp, size_t tokens) {
    return lp / static_cast<double>(tokens + 1);  // +1 counts the EOS step
  };

  std::vector<Beam> beams{Beam{{}, 0.0, init_state(tape, CellType::kGru, spec.dims.d_s), kBosId}};
  std::vector<Finished> done;

  for (size_t step = 0; step < max_len + 1 && !beams.empty(); ++step) {
    struct Cand {
      size_t beam;
      int token;
      double logprob;
      ControllerState state;
    };
    std::vector<Cand> cands;
    for (size_t b = 0; b < beams.size(); ++b) {
      ContentRead c = read_content(tape, top, beams[b].state.hidden, gate);
      Var input = tape.concat(tape.row(tgt_emb, static_cast<size_t>(beams[b].prev)), c.value);
      ControllerState ns = gru_step(tape, gru, beams[b].state, input);
      std::vector<double> lp = log_softmax_values(tape.val(tape.affine(proj_w, ns.hidden, proj_b)));
      for (size_t v = 0; v < lp.size(); ++v)
        cands.push_back({b, static_cast<int>(v), beams[b].logprob + lp[v], ns});
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.logprob > b.logprob; });
    // The top `width` candidates claim the beam slots; an EOS candidate
    // retires its slot. This makes width 1 coincide with greedy decoding.
    std::vector<Beam> next;
    size_t selected = 0;
    for (const Cand& c : cands) {
      if (selected >= width) break;
      ++selected;
      if (c.token == kEosId) {
        done.push_back({beams[c.beam].tokens, normalized(c.logprob, beams[c.beam].tokens.size())});
        continue;
      }
      Beam nb;
      nb.tokens = beams[c.beam].tokens;
      nb.tokens.push_back(c.token);
      nb.logprob = c.logprob;
      nb.state = c.state;
      nb.prev = c.token;
      next.push_back(std::move(nb));
    }
    beams.swap(next);
    if (!beams.empty() && beams[0].tokens.size() >= max_len) {
      for (const Beam& b : beams) done.push_back({b.tokens, normalized(b.logprob, b.tokens.size())});
      beams.clear();
    }
  }
  for (const Beam& b : beams) done.push_back({b.tokens, normalized(b.logprob, b.tokens.size())});
  if (done.empty()) return {};
  const Finished* best = &done[0];
  for (const Finished& f : done)
    if (f.score > best->score) best = &f;
  return best->tokens;
}

}  // namespace dmem
