#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmem/architecture.hpp"
#include "dmem/params.hpp"

namespace dmem {

// One encoded sentence pair (ids include the trailing EOS).
struct IdPair {
  std::vector<int> src;
  std::vector<int> tgt;
};

// Padded, masked minibatch. Masks are prefix-shaped; padded slots hold PAD.
struct Batch {
  std::vector<std::vector<int>> src, tgt;
  std::vector<std::vector<uint8_t>> src_mask, tgt_mask;
  std::vector<size_t> src_len, tgt_len;

  size_t size() const { return src.size(); }
};

struct TrainConfig {
  size_t batch_size = 80;
  double rho = 0.95;
  double epsilon = 1e-6;
  size_t max_epochs = 10;
  double clip_norm = 5.0;
  uint64_t seed = 42;
  bool bucket_by_length = true;
};

// Per-parameter decayed accumulators of squared gradients and updates.
struct AdaDeltaState {
  ParamStore eg2;
  ParamStore edx2;
  double rho = 0.95;
  double epsilon = 1e-6;

  static AdaDeltaState init(const ParamStore& params, double rho, double epsilon) {
    return AdaDeltaState{params.zeros_like(), params.zeros_like(), rho, epsilon};
  }
};

// E[g²] ← ρE[g²]+(1−ρ)g²; Δx = −√(E[Δx²]+ε)/√(E[g²]+ε)·g; params += Δx.
// Throws ContractError naming the parameter on a NaN gradient.
void adadelta_update(AdaDeltaState& state, ParamStore& params, const ParamStore& grads);

// Mean NLL over unmasked positions; throws on an all-masked batch.
double masked_nll(const std::vector<std::vector<double>>& contributions,
                  const std::vector<std::vector<uint8_t>>& mask);

// Scale gradients so the global norm does not exceed `clip_norm`; returns
// the applied factor c ∈ (0, 1].
double clip_global_norm(ParamStore& grads, double clip_norm);

// Length-bucketed batching: sort by (src, tgt) length, cut into batches,
// then shuffle batch order. Every pair appears exactly once.
std::vector<Batch> make_batches(const std::vector<IdPair>& corpus, size_t batch_size,
                                bool bucket_by_length, Rng& rng);

struct EpochReport {
  size_t epoch = 0;
  double mean_loss = 0.0;  // per-token NLL over the epoch
  size_t tokens = 0;
  double wall_seconds = 0.0;
};

std::string format_epoch_record(const EpochReport& r);

// One pass over the corpus: seeded shuffle, forward+backward per batch,
// gradient clipping, AdaDelta update. Deterministic given config.seed.
EpochReport train_epoch(const ArchSpec& spec, ParamStore& params, AdaDeltaState& opt,
                        const std::vector<IdPair>& corpus, const TrainConfig& config,
                        size_t epoch);

// Batch loss + gradient accumulation; exposed for tests of batching
// transparency. Returns summed NLL and token count.
std::pair<double, size_t> batch_loss_and_grads(const ArchSpec& spec, const ParamStore& params,
                                               const Batch& batch, ParamStore* grads_out);

}  // namespace dmem
