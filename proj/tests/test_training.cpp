#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmem/corpus.hpp"
#include "dmem/training.hpp"

using namespace dmem;

namespace {

ParamStore single_param(double v) {
  ParamStore p;
  p.add("x", Tensor::scalar(v));
  return p;
}

std::vector<IdPair> micro_corpus(size_t count, size_t vocab, Rng rng) {
  std::vector<IdPair> corpus;
  for (size_t i = 0; i < count; ++i) {
    size_t len = 2 + rng.next_below(4);
    std::vector<int> src(len);
    for (int& v : src) v = kNumSpecials + static_cast<int>(rng.next_below(vocab - kNumSpecials));
    std::vector<int> tgt = src;
    src.push_back(kEosId);
    tgt.push_back(kEosId);
    corpus.push_back({std::move(src), std::move(tgt)});
  }
  return corpus;
}

}  // namespace

TEST_CASE("adadelta first step matches the closed form") {
  // E[g²] = 0.05 after one update; Δx = −√(0+ε)/√(0.05+ε)·1
  ParamStore p = single_param(0.0);
  AdaDeltaState opt = AdaDeltaState::init(p, 0.95, 1e-6);
  ParamStore g = p.zeros_like();
  g.at("x").data[0] = 1.0;
  adadelta_update(opt, p, g);

  double want = -std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6);
  CHECK(std::abs(p.at("x").data[0] - want) < 1e-10);
  CHECK(std::abs(want - (-4.4721e-3)) < 1e-7);  // published rounded value
  CHECK(opt.eg2.at("x").data[0] == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("adadelta accumulators stay nonnegative over random updates") {
  ParamStore p = single_param(0.3);
  AdaDeltaState opt = AdaDeltaState::init(p, 0.95, 1e-6);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    ParamStore g = p.zeros_like();
    g.at("x").data[0] = rng.uniform(-2, 2);
    adadelta_update(opt, p, g);
    CHECK(opt.eg2.at("x").data[0] >= 0.0);
    CHECK(opt.edx2.at("x").data[0] >= 0.0);
  }
}

TEST_CASE("adadelta rejects non-finite gradients naming the parameter") {
  ParamStore p = single_param(0.0);
  AdaDeltaState opt = AdaDeltaState::init(p, 0.95, 1e-6);
  ParamStore g = p.zeros_like();
  g.at("x").data[0] = std::nan("");
  try {
    adadelta_update(opt, p, g);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
}

TEST_CASE("masked_nll averages only unmasked positions") {
  std::vector<std::vector<double>> c{{1.0, 2.0}, {3.0, 100.0}};
  std::vector<std::vector<uint8_t>> m{{1, 1}, {1, 0}};
  CHECK(masked_nll(c, m) == doctest::Approx(2.0));
  std::vector<std::vector<uint8_t>> all_masked{{0, 0}, {0, 0}};
  CHECK_THROWS_AS(masked_nll(c, all_masked), ContractError);
  std::vector<std::vector<uint8_t>> bad{{1}};
  CHECK_THROWS_AS(masked_nll(c, bad), ShapeError);
}

TEST_CASE("global norm clipping") {
  ParamStore g;
  g.add("a", Tensor::vec({3.0, 4.0}));  // norm 5
  SUBCASE("below threshold untouched") {
    double c = clip_global_norm(g, 10.0);
    CHECK(c == 1.0);
    CHECK(g.at("a").data == std::vector<double>{3.0, 4.0});
  }
  SUBCASE("above threshold rescaled to the threshold") {
    double c = clip_global_norm(g, 1.0);
    CHECK(c == doctest::Approx(0.2));
    double norm = std::hypot(g.at("a").data[0], g.at("a").data[1]);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("zero gradient is left alone") {
    ParamStore z;
    z.add("a", Tensor::vec({0.0, 0.0}));
    CHECK(clip_global_norm(z, 1.0) == 1.0);
  }
}

TEST_CASE("make_batches partitions the corpus exactly once") {
  Rng data_rng(3);
  std::vector<IdPair> corpus = micro_corpus(57, 10, data_rng);
  Rng rng(9);
  std::vector<Batch> batches = make_batches(corpus, 8, true, rng);

  size_t total = 0;
  std::vector<std::vector<int>> seen;
  for (const Batch& b : batches) {
    total += b.size();
    CHECK(b.size() <= 8);
    for (size_t i = 0; i < b.size(); ++i) {
      // padded slots are PAD with mask 0; unmasked prefix reproduces the pair
      std::vector<int> src(b.src[i].begin(), b.src[i].begin() + b.src_len[i]);
      for (size_t j = b.src_len[i]; j < b.src[i].size(); ++j) {
        CHECK(b.src[i][j] == kPadId);
        CHECK(b.src_mask[i][j] == 0);
      }
      seen.push_back(src);
    }
  }
  CHECK(total == corpus.size());

  std::vector<std::vector<int>> want;
  for (const IdPair& p : corpus) want.push_back(p.src);
  std::sort(seen.begin(), seen.end());
  std::sort(want.begin(), want.end());
  CHECK(seen == want);
}

TEST_CASE("bucketed batches group similar lengths") {
  Rng data_rng(4);
  std::vector<IdPair> corpus = micro_corpus(64, 10, data_rng);
  Rng rng(10);
  std::vector<Batch> batches = make_batches(corpus, 8, true, rng);
  // within each batch, lengths span at most the bucket boundary effects;
  // verify each batch is sorted-contiguous: max-min length small compared to
  // a fully random split (here: every batch spans ≤ 2 distinct src lengths
  // except possibly boundary batches — check the common case loosely)
  size_t tight = 0;
  for (const Batch& b : batches) {
    size_t mn = SIZE_MAX, mx = 0;
    for (size_t l : b.src_len) {
      mn = std::min(mn, l);
      mx = std::max(mx, l);
    }
    if (mx - mn <= 1) ++tight;
  }
  CHECK(tight >= batches.size() - 2);
}

TEST_CASE("epoch record format is stable") {
  EpochReport r{3, 1.23456789, 4242, 12.3456};
  CHECK(format_epoch_record(r) == "epoch=3 mean_loss=1.23456789 tokens=4242 wall_seconds=12.346");
}

TEST_CASE("batch loss equals the sum of per-sentence losses") {
  ArchSpec spec = build_preset(Preset::kRnnSearch, Dims{4, 6, 6}, 11, 11);
  ParamStore params;
  Rng rng(42);
  init_params(spec, params, rng);

  Rng data_rng(6);
  std::vector<IdPair> corpus = micro_corpus(5, 11, data_rng);
  Rng brng(1);
  std::vector<Batch> batches = make_batches(corpus, 5, true, brng);
  REQUIRE(batches.size() == 1);

  auto [batch_total, batch_tokens] = batch_loss_and_grads(spec, params, batches[0], nullptr);

  double want = 0.0;
  size_t want_tokens = 0;
  for (const IdPair& p : corpus) {
    Tape tape;
    Bound bound(tape, params);
    EncodeResult enc = encode(tape, bound, spec, p.src);
    TrainLoss l = decode_train(tape, bound, spec, enc, p.tgt);
    want += tape.val(l.total).data[0];
    want_tokens += l.tokens;
  }
  CHECK(batch_total == doctest::Approx(want).epsilon(1e-12));
  CHECK(batch_tokens == want_tokens);
}

TEST_CASE("train_epoch is deterministic and resume-equivalent") {
  ArchSpec spec = build_preset(Preset::kRnnSearch, Dims{4, 6, 6}, 11, 11);
  Rng data_rng(6);
  std::vector<IdPair> corpus = micro_corpus(24, 11, data_rng);
  TrainConfig cfg;
  cfg.batch_size = 6;
  cfg.seed = 42;
  cfg.max_epochs = 2;

  auto fresh = [&]() {
    ParamStore params;
    Rng rng(42);
    init_params(spec, params, rng);
    return params;
  };

  // two identical runs
  ParamStore p1 = fresh(), p2 = fresh();
  AdaDeltaState o1 = AdaDeltaState::init(p1, cfg.rho, cfg.epsilon);
  AdaDeltaState o2 = AdaDeltaState::init(p2, cfg.rho, cfg.epsilon);
  EpochReport r1a = train_epoch(spec, p1, o1, corpus, cfg, 1);
  EpochReport r1b = train_epoch(spec, p2, o2, corpus, cfg, 1);
  CHECK(r1a.mean_loss == r1b.mean_loss);  // bit-identical
  for (const std::string& n : p1.names()) CHECK(p1.at(n).data == p2.at(n).data);

  // uninterrupted epoch 2 vs "resumed" epoch 2 on the copied state
  ParamStore p3 = p2;
  AdaDeltaState o3 = o2;
  EpochReport r2a = train_epoch(spec, p1, o1, corpus, cfg, 2);
  EpochReport r2b = train_epoch(spec, p3, o3, corpus, cfg, 2);
  CHECK(r2a.mean_loss == r2b.mean_loss);
  for (const std::string& n : p1.names()) CHECK(p1.at(n).data == p3.at(n).data);

  CHECK_THROWS_AS(train_epoch(spec, p1, o1, {}, cfg, 3), DomainError);
}
