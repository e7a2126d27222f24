#include <benchmark/benchmark.h>

#include <vector>

#include "fednlp/tensor/attention.hpp"
#include "fednlp/tensor/autodiff.hpp"
#include "fednlp/tensor/ops.hpp"
#include "fednlp/tensor/rng.hpp"

using namespace fednlp;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <auto Kernel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0);
    Kernel(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["flops"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_AttentionForwardBackward(benchmark::State& state) {
  AttentionShape shape{8, static_cast<std::size_t>(state.range(0)), 4, 32};
  const std::size_t rows = shape.batch * shape.seq_len, cols = shape.n_heads * shape.head_dim;
  std::vector<std::uint8_t> mask(rows, 1);
  for (std::size_t b = 0; b < shape.batch; ++b) mask[b * shape.seq_len + shape.seq_len - 1] = 0;
  auto q = random_values(rows * cols, 3), k = random_values(rows * cols, 4), v = random_values(rows * cols, 5);
  for (auto _ : state) {
    Tape tape;
    auto out = multi_head_attention(tape.leaf(Tensor({rows, cols}, q)), tape.leaf(Tensor({rows, cols}, k)),
                                    tape.leaf(Tensor({rows, cols}, v)), mask, shape);
    tape.backward(sum(out.context));
    benchmark::ClobberMemory();
  }
}

}  // namespace

BENCHMARK(BM_Gemm<kernels::gemm_nn>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<kernels::gemm_nt>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<kernels::gemm_tn>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_AttentionForwardBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
