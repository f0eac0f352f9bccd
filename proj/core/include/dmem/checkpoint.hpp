#pragma once

#include <string>

#include "dmem/architecture.hpp"
#include "dmem/corpus.hpp"
#include "dmem/training.hpp"

namespace dmem {

// Binary container: magic "DMEM", format version, JSON header (architecture
// + vocabularies + counters), then named little-endian float64 blobs for
// parameters and optimizer accumulators. load(save(x)) is bit-exact.
struct Checkpoint {
  ArchSpec spec;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  ParamStore params;
  AdaDeltaState opt;
  uint64_t rng_state = 0;
  uint64_t epoch = 0;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string arch_to_json(const ArchSpec& spec);
ArchSpec arch_from_json(const std::string& text);

}  // namespace dmem
