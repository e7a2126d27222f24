#include <benchmark/benchmark.h>

#include "fednlp/data/vocabulary.hpp"
#include "fednlp/models/model.hpp"
#include "fednlp/models/trainer.hpp"
#include "fednlp/tensor/adam.hpp"
#include "fednlp/tensor/rng.hpp"

using namespace fednlp;
using namespace fednlp::models;

namespace {

constexpr std::size_t kVocab = 2000;
constexpr std::size_t kSeqLen = 32;

std::vector<data::EncodedRecord> records(std::size_t n) {
  Rng rng(9);
  std::vector<data::EncodedRecord> out(n);
  for (auto& r : out) {
    r.label = static_cast<std::int32_t>(rng.below(2));
    r.ids.resize(kSeqLen - 1);
    for (auto& id : r.ids) id = data::kFirstTokenId + static_cast<std::int32_t>(rng.below(kVocab - data::kFirstTokenId));
  }
  return out;
}

ModelConfig preset(int which) {
  return which == 0 ? bert_mini_preset(kVocab, kSeqLen) : lstm_preset(kVocab, kSeqLen);
}

// One Adam step on a single batch of 32 sequences.
void BM_TrainStep(benchmark::State& state) {
  const auto config = preset(static_cast<int>(state.range(0)));
  const bool mlm = state.range(1) == 1;
  auto model = init_model(config, mlm ? Head::mlm : Head::classify, 1);
  AdamState adam(AdamOptions{.lr = 1e-3});
  auto data = records(32);
  TrainOptions o;
  o.task = mlm ? Task::mlm : Task::classify;
  o.batch_size = data.size();
  std::uint64_t epoch = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train_epoch(model, adam, data, o, epoch++));
  state.SetItemsProcessed(state.iterations() * data.size() * kSeqLen);
  state.SetLabel(std::string(config.kind == ModelKind::lstm ? "lstm" : "bert_mini") + (mlm ? "/mlm" : "/classify"));
}

void BM_Evaluate(benchmark::State& state) {
  const auto config = preset(static_cast<int>(state.range(0)));
  auto model = init_model(config, Head::classify, 1);
  auto data = records(256);
  EvalOptions o;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(config, Head::classify, model.parameters(), data, o));
  state.SetItemsProcessed(state.iterations() * data.size() * kSeqLen);
}

}  // namespace

BENCHMARK(BM_TrainStep)->Args({0, 0})->Args({0, 1})->Args({1, 0})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
