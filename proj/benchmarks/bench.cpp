#include <benchmark/benchmark.h>

#include "dmem/corpus.hpp"
#include "dmem/memory.hpp"
#include "dmem/training.hpp"

using namespace dmem;

namespace {

std::vector<Var> leaf_rows(Tape& tape, size_t n, size_t d, Rng& rng) {
  std::vector<Var> rows;
  for (size_t i = 0; i < n; ++i) {
    Tensor t = Tensor::zeros({d});
    for (double& v : t.data) v = rng.uniform(-0.5, 0.5);
    rows.push_back(tape.leaf(t));
  }
  return rows;
}

}  // namespace

static void BM_LstmStep(benchmark::State& state) {
  size_t d = static_cast<size_t>(state.range(0));
  ParamStore store;
  Rng rng(1);
  register_lstm({"cell", d, d}, store, rng);
  Tensor x = Tensor::zeros({d});
  for (double& v : x.data) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    Tape tape;
    Bound bound(tape, store);
    ControllerState st = init_state(tape, CellType::kLstm, d);
    st = lstm_step(tape, bind_lstm(bound, "cell"), st, tape.leaf(x));
    benchmark::DoNotOptimize(tape.val(st.hidden).data[0]);
  }
}
BENCHMARK(BM_LstmStep)->Arg(64)->Arg(128);

static void BM_Softmax(benchmark::State& state) {
  size_t n = static_cast<size_t>(state.range(0));
  Rng rng(2);
  Tensor scores = Tensor::zeros({n});
  for (double& v : scores.data) v = rng.uniform(-4, 4);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(tape.val(tape.softmax(tape.leaf(scores))).data[0]);
  }
}
BENCHMARK(BM_Softmax)->Arg(64)->Arg(1024);

static void BM_ContentRead(benchmark::State& state) {
  size_t n = static_cast<size_t>(state.range(0)), d = 64, d_s = 64;
  ParamStore store;
  Rng rng(3);
  register_mlp({"gate", d_s + d, d_s, 1}, store, rng);
  Tensor s = Tensor::zeros({d_s});
  for (double& v : s.data) v = rng.uniform(-0.5, 0.5);
  for (auto _ : state) {
    Tape tape;
    Bound bound(tape, store);
    MemoryMat src = MemoryMat::sealed(1, d, leaf_rows(tape, n, d, rng));
    ContentRead r = read_content(tape, src, tape.leaf(s), bind_mlp(bound, "gate"));
    benchmark::DoNotOptimize(tape.val(r.value).data[0]);
  }
}
BENCHMARK(BM_ContentRead)->Arg(10)->Arg(40);

static void BM_RunLayerForward(benchmark::State& state) {
  size_t n = static_cast<size_t>(state.range(0)), d = 32, d_s = 32, d_out = 32;
  ParamStore store;
  Rng rng(4);
  register_lstm({"fwd", d_s, d}, store, rng);
  register_mlp({"write.mlp", d_s, d_s, d_out}, store, rng);
  for (auto _ : state) {
    Tape tape;
    Bound bound(tape, store);
    MemoryMat src = MemoryMat::sealed(1, d, leaf_rows(tape, n, d, rng));
    BoundLayer layer;
    layer.reads = {{ReadMode::kLocation, &src, std::nullopt}};
    layer.write_mlp = bind_mlp(bound, "write.mlp");
    layer.controller = bind_lstm(bound, "fwd");
    layer.d_state = d_s;
    layer.d_out = d_out;
    LayerRun out = run_layer(tape, layer, 2);
    benchmark::DoNotOptimize(tape.val(out.memory.row(n - 1)).data[0]);
  }
}
BENCHMARK(BM_RunLayerForward)->Arg(10)->Arg(25);

static void BM_TrainingStep(benchmark::State& state) {
  ArchSpec spec = build_preset(Preset::kArc2, Dims{16, 32, 32}, 16, 16);
  ParamStore params;
  Rng rng(5);
  init_params(spec, params, rng);
  AdaDeltaState opt = AdaDeltaState::init(params, 0.95, 1e-6);

  SyntheticTaskSpec task{TaskKind::kCopy, 12, 4, 8, 16, 6};
  ParallelCorpus data = gen_task(task);
  std::vector<Sentence> all;
  for (const auto& [s, t] : data.pairs) all.push_back(s);
  Vocabulary vocab = build_vocab(all, 12).vocab;
  std::vector<IdPair> corpus;
  for (const auto& [s, t] : data.pairs)
    corpus.push_back({encode_sentence(vocab, s), encode_sentence(vocab, t)});

  TrainConfig cfg;
  cfg.batch_size = 16;
  size_t epoch = 0;
  for (auto _ : state) {
    EpochReport r = train_epoch(spec, params, opt, corpus, cfg, ++epoch);
    benchmark::DoNotOptimize(r.mean_loss);
  }
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);
