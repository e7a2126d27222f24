#include <benchmark/benchmark.h>

#include "fednlp/fl/aggregate.hpp"
#include "fednlp/models/model.hpp"
#include "fednlp/transport/wire.hpp"

using namespace fednlp;

namespace {

ParameterSet bert_mini_params() {
  return models::init_model(models::bert_mini_preset(2000, 64), models::Head::classify, 3).parameters();
}

void BM_EncodeLocalUpdate(benchmark::State& state) {
  fl::FlMessage m = fl::LocalUpdate{1, 2, bert_mini_params(), 100, {}, 7};
  std::size_t bytes = 0;
  for (auto _ : state) {
    auto frame = transport::encode_message(m);
    bytes = frame.size();
    benchmark::DoNotOptimize(frame.data());
  }
  state.SetBytesProcessed(state.iterations() * bytes);
}

void BM_DecodeLocalUpdate(benchmark::State& state) {
  auto frame = transport::encode_message(fl::LocalUpdate{1, 2, bert_mini_params(), 100, {}, 7});
  for (auto _ : state) benchmark::DoNotOptimize(transport::decode_message(frame, frame.size()));
  state.SetBytesProcessed(state.iterations() * frame.size());
}

void BM_FedAvg(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto base = bert_mini_params();
  std::vector<fl::ClientUpdate> updates;
  for (std::size_t i = 0; i < n; ++i) updates.push_back({static_cast<std::uint32_t>(i), 10 * (i + 1), &base});
  for (auto _ : state) benchmark::DoNotOptimize(fl::federated_average(updates));
}

}  // namespace

BENCHMARK(BM_EncodeLocalUpdate)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DecodeLocalUpdate)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FedAvg)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
