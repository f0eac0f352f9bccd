#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmem/memory.hpp"
#include "dmem/params.hpp"

namespace dmem {

struct Dims {
  size_t d_emb = 32;
  size_t d_s = 64;
  size_t d_mem = 64;
};

enum class Preset { kRnnSearch, kArc1Loc, kArc1Hyb, kArc2, kArc3, kArc4 };

Preset preset_from_string(const std::string& name);
std::string preset_name(Preset p);
const std::vector<Preset>& all_presets();

// A read source is either a layer or a bundle of layers.
struct MemRef {
  enum class Kind { kLayer, kBundle };
  Kind kind = Kind::kLayer;
  int id = 0;

  static MemRef layer(int id) { return {Kind::kLayer, id}; }
  static MemRef bundle(int id) { return {Kind::kBundle, id}; }
  bool operator==(const MemRef&) const = default;
};

struct ReadHeadSpec {
  ReadMode mode;
  MemRef source;
};

struct LayerSpecA {
  int id = 0;  // layer ids start at 2; layer 1 is the embedding layer
  std::vector<ReadHeadSpec> reads;
  WriteMode write_mode = WriteMode::kLocation;
  bool bidirectional = false;
  std::optional<size_t> fixed_len;  // content write only; default: tempo length
};

struct BundleSpec {
  int id = 0;  // bundle ids live in their own 100+ range
  std::vector<int> members;  // layer ids, concatenated in declaration order
};

struct OutputSpec {
  MemRef read_source;  // pure content read
  size_t max_len = 64;
};

// Validated DAG of memory layers plus the generating output layer.
struct ArchSpec {
  std::string preset;
  Dims dims;
  size_t src_vocab = 0;
  size_t tgt_vocab = 0;
  std::vector<LayerSpecA> layers;
  std::vector<BundleSpec> bundles;
  OutputSpec output;
  uint64_t content_init_seed = 7;  // seeds the random prefill of content-written memories

  size_t transformation_layer_count() const { return layers.size(); }
  size_t intermediate_layer_count() const { return layers.size() + 1; }  // + embedding layer
};

ArchSpec build_preset(Preset p, Dims dims, size_t src_vocab, size_t tgt_vocab);

// Structural checks; returns human-readable violations instead of throwing.
std::vector<std::string> validate(const ArchSpec& spec);

// Memory width of a layer/bundle as wired by the spec.
size_t mem_dim(const ArchSpec& spec, MemRef ref);

void init_params(const ArchSpec& spec, ParamStore& store, Rng& rng);
size_t param_count(const ArchSpec& spec);

struct EncodeResult {
  std::map<int, MemoryMat> layers;
  std::map<int, MemoryMat> bundles;
  // layer id -> per-timestep content-addressing weights (inspect hook)
  std::map<int, std::vector<std::vector<double>>> attention;

  const MemoryMat& get(MemRef ref) const;
};

// Runs the full layer stack over one source sentence; all returned memories
// are sealed.
EncodeResult encode(Tape& tape, const Bound& bound, const ArchSpec& spec,
                    const std::vector<int>& src_ids);

struct TrainLoss {
  Var total;  // summed NLL over target tokens
  Var mean;   // per-token NLL
  size_t tokens = 0;
};

// Teacher-forced NLL of the target sequence (must end with EOS).
TrainLoss decode_train(Tape& tape, const Bound& bound, const ArchSpec& spec,
                       const EncodeResult& enc, const std::vector<int>& tgt_ids);

struct GreedyResult {
  std::vector<int> tokens;  // EOS excluded
  std::vector<std::vector<double>> attention;  // output-layer read weights per step
};

GreedyResult decode_greedy(const ArchSpec& spec, const ParamStore& params,
                           const std::vector<int>& src_ids, size_t max_len);

// Length-normalized beam search; width 1 coincides with greedy decoding.
std::vector<int> decode_beam(const ArchSpec& spec, const ParamStore& params,
                             const std::vector<int>& src_ids, size_t width, size_t max_len);

// Row-wise concatenation of aligned sealed memories.
MemoryMat bundle_memories(Tape& tape, int bundle_id, const std::vector<const MemoryMat*>& members);

}  // namespace dmem
