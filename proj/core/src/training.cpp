#include "dmem/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dmem/tokens.hpp"

namespace dmem {

void adadelta_update(AdaDeltaState& state, ParamStore& params, const ParamStore& grads) {
  for (const std::string& name : params.names()) {
    Tensor& p = params.at(name);
    const Tensor& g = grads.at(name);
    Tensor& eg2 = state.eg2.at(name);
    Tensor& edx2 = state.edx2.at(name);
    if (!p.same_shape(g)) throw ShapeError("adadelta_update: gradient shape mismatch for " + name);
    for (size_t i = 0; i < p.size(); ++i) {
      double gv = g.data[i];
      if (std::isnan(gv) || std::isinf(gv))
        throw ContractError("adadelta_update: non-finite gradient in parameter " + name);
      eg2.data[i] = state.rho * eg2.data[i] + (1.0 - state.rho) * gv * gv;
      double dx = -std::sqrt(edx2.data[i] + state.epsilon) / std::sqrt(eg2.data[i] + state.epsilon) * gv;
      edx2.data[i] = state.rho * edx2.data[i] + (1.0 - state.rho) * dx * dx;
      p.data[i] += dx;
    }
  }
}

double masked_nll(const std::vector<std::vector<double>>& contributions,
                  const std::vector<std::vector<uint8_t>>& mask) {
  if (contributions.size() != mask.size()) throw ShapeError("masked_nll: shape mismatch");
  double total = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < contributions.size(); ++i) {
    if (contributions[i].size() != mask[i].size()) throw ShapeError("masked_nll: shape mismatch");
    for (size_t j = 0; j < contributions[i].size(); ++j)
      if (mask[i][j]) {
        total += contributions[i][j];
        ++count;
      }
  }
  if (count == 0) throw ContractError("masked_nll: all positions masked");
  return total / static_cast<double>(count);
}

double clip_global_norm(ParamStore& grads, double clip_norm) {
  double sq = 0.0;
  for (const std::string& name : grads.names())
    for (double v : grads.at(name).data) sq += v * v;
  double norm = std::sqrt(sq);
  if (norm <= clip_norm || norm == 0.0) return 1.0;
  double c = clip_norm / norm;
  for (const std::string& name : grads.names())
    for (double& v : grads.at(name).data) v *= c;
  return c;
}

std::vector<Batch> make_batches(const std::vector<IdPair>& corpus, size_t batch_size,
                                bool bucket_by_length, Rng& rng) {
  if (batch_size < 1) throw DomainError("make_batches: batch_size must be >= 1");
  std::vector<size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with our own stream, so shuffles are platform-stable.
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);
  if (bucket_by_length) {
    std::stable_sort(order.begin(), order.end(), [&corpus](size_t a, size_t b) {
      if (corpus[a].src.size() != corpus[b].src.size())
        return corpus[a].src.size() < corpus[b].src.size();
      return corpus[a].tgt.size() < corpus[b].tgt.size();
    });
  }

  std::vector<Batch> batches;
  for (size_t start = 0; start < order.size(); start += batch_size) {
    size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    size_t smax = 0, tmax = 0;
    for (size_t i = start; i < end; ++i) {
      smax = std::max(smax, corpus[order[i]].src.size());
      tmax = std::max(tmax, corpus[order[i]].tgt.size());
    }
    for (size_t i = start; i < end; ++i) {
      const IdPair& p = corpus[order[i]];
      std::vector<int> s(smax, kPadId), t(tmax, kPadId);
      std::vector<uint8_t> sm(smax, 0), tm(tmax, 0);
      std::copy(p.src.begin(), p.src.end(), s.begin());
      std::copy(p.tgt.begin(), p.tgt.end(), t.begin());
      std::fill(sm.begin(), sm.begin() + p.src.size(), 1);
      std::fill(tm.begin(), tm.begin() + p.tgt.size(), 1);
      b.src.push_back(std::move(s));
      b.tgt.push_back(std::move(t));
      b.src_mask.push_back(std::move(sm));
      b.tgt_mask.push_back(std::move(tm));
      b.src_len.push_back(p.src.size());
      b.tgt_len.push_back(p.tgt.size());
    }
    batches.push_back(std::move(b));
  }

  // Shuffle batch order so bucketing does not impose a length curriculum.
  for (size_t i = batches.size(); i > 1; --i)
    std::swap(batches[i - 1], batches[rng.next_below(i)]);
  return batches;
}

std::pair<double, size_t> batch_loss_and_grads(const ArchSpec& spec, const ParamStore& params,
                                               const Batch& batch, ParamStore* grads_out) {
  double total = 0.0;
  size_t tokens = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    std::vector<int> src(batch.src[i].begin(), batch.src[i].begin() + batch.src_len[i]);
    std::vector<int> tgt(batch.tgt[i].begin(), batch.tgt[i].begin() + batch.tgt_len[i]);
    Tape tape;
    Bound bound(tape, params);
    EncodeResult enc = encode(tape, bound, spec, src);
    TrainLoss loss = decode_train(tape, bound, spec, enc, tgt);
    total += tape.val(loss.total).data[0];
    tokens += loss.tokens;
    if (grads_out) {
      tape.backward(loss.total);
      bound.collect_grads(*grads_out);
    }
  }
  return {total, tokens};
}

std::string format_epoch_record(const EpochReport& r) {
  std::ostringstream os;
  os << "epoch=" << r.epoch << " mean_loss=";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.8f", r.mean_loss);
  os << buf << " tokens=" << r.tokens << " wall_seconds=";
  std::snprintf(buf, sizeof(buf), "%.3f", r.wall_seconds);
  os << buf;
  return os.str();
}

EpochReport train_epoch(const ArchSpec& spec, ParamStore& params, AdaDeltaState& opt,
                        const std::vector<IdPair>& corpus, const TrainConfig& config,
                        size_t epoch) {
  if (corpus.empty()) throw DomainError("train_epoch: empty corpus");
  auto t0 = std::chrono::steady_clock::now();

  // Shuffle stream depends only on (seed, epoch): a resumed run batches
  // exactly like the uninterrupted one.
  Rng rng = Rng(config.seed).split("epoch").split(epoch);
  std::vector<Batch> batches = make_batches(corpus, config.batch_size, config.bucket_by_length, rng);

  double epoch_loss = 0.0;
  size_t epoch_tokens = 0;
  ParamStore grads = params.zeros_like();
  for (const Batch& batch : batches) {
    for (const std::string& name : grads.names())
      std::fill(grads.at(name).data.begin(), grads.at(name).data.end(), 0.0);
    auto [loss, tokens] = batch_loss_and_grads(spec, params, batch, &grads);
    if (std::isnan(loss)) throw ContractError("train_epoch: loss diverged (NaN)");
    // Per-token mean objective: scale summed gradients by the token count.
    double inv = 1.0 / static_cast<double>(tokens);
    for (const std::string& name : grads.names())
      for (double& v : grads.at(name).data) v *= inv;
    clip_global_norm(grads, config.clip_norm);
    adadelta_update(opt, params, grads);
    epoch_loss += loss;
    epoch_tokens += tokens;
  }

  EpochReport report;
  report.epoch = epoch;
  report.mean_loss = epoch_loss / static_cast<double>(epoch_tokens);
  report.tokens = epoch_tokens;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace dmem
