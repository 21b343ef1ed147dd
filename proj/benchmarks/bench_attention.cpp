// Factorized tubelet attention vs. full joint self-attention over the same
// N*T tokens at equal width. The Args pairs are (tubelets, frames).
#include <benchmark/benchmark.h>

#include "tuber/model.hpp"
#include "tuber/tape.hpp"

using namespace tuber;

namespace {

constexpr int64_t kDim = 64;
constexpr int64_t kHeads = 4;

void BM_TubeletAttention(benchmark::State& state) {
    NoGradGuard guard;
    const int64_t n = state.range(0);
    const int64_t t = state.range(1);
    Rng rng(1);
    TubeletAttentionT<float> attn(kDim, kHeads, rng);
    const Tensor x = Tensor::randn({n, t, kDim}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(attn.forward(x, {}));
    state.SetItemsProcessed(state.iterations() * n * t);
}

void BM_FullAttention(benchmark::State& state) {
    NoGradGuard guard;
    const int64_t n = state.range(0);
    const int64_t t = state.range(1);
    Rng rng(1);
    MultiHeadSelfAttentionT<float> attn(kDim, kHeads, rng);
    const Tensor x = Tensor::randn({n * t, kDim}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(attn.forward(x, {}, {}));
    state.SetItemsProcessed(state.iterations() * n * t);
}

}  // namespace

BENCHMARK(BM_TubeletAttention)->Args({8, 8})->Args({8, 16})->Args({15, 32})->Args({16, 64});
BENCHMARK(BM_FullAttention)->Args({8, 8})->Args({8, 16})->Args({15, 32})->Args({16, 64});

BENCHMARK_MAIN();
