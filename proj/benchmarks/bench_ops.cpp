// Hot tensor primitives at the shapes the model actually runs.
#include <benchmark/benchmark.h>

#include "tuber/ops.hpp"
#include "tuber/rng.hpp"
#include "tuber/tape.hpp"

using namespace tuber;

namespace {

void BM_MatMul(benchmark::State& state) {
    NoGradGuard guard;
    const int64_t n = state.range(0);
    Rng rng(1);
    const Tensor a = Tensor::randn({n, n}, rng);
    const Tensor b = Tensor::randn({n, n}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

void BM_Conv3d(benchmark::State& state) {
    NoGradGuard guard;
    Rng rng(1);
    const Tensor x = Tensor::randn({16, 32, 32, 16}, rng);
    const Tensor w = Tensor::randn({3, 3, 3, 16, 32}, rng, 0.1);
    const Tensor b = Tensor::zeros({32});
    for (auto _ : state)
        benchmark::DoNotOptimize(conv3d(x, w, b, {2, 2, 2}, {1, 1, 1}));
}

void BM_Softmax(benchmark::State& state) {
    NoGradGuard guard;
    const int64_t n = state.range(0);
    Rng rng(1);
    const Tensor x = Tensor::randn({n, n}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(softmax(x, 1));
}

void BM_LayerNorm(benchmark::State& state) {
    NoGradGuard guard;
    Rng rng(1);
    const Tensor x = Tensor::randn({512, 64}, rng);
    const Tensor gamma = Tensor::zeros({64});
    const Tensor beta = Tensor::zeros({64});
    for (auto _ : state) benchmark::DoNotOptimize(layer_norm(x, gamma, beta));
}

}  // namespace

BENCHMARK(BM_MatMul)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Conv3d);
BENCHMARK(BM_Softmax)->Arg(128)->Arg(480);
BENCHMARK(BM_LayerNorm);

BENCHMARK_MAIN();
