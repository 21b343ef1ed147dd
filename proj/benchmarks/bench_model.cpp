// Whole-model cost at the desk-scale defaults: eval forward, and a training
// step (forward, set loss, backward) on one clip.
#include <benchmark/benchmark.h>

#include "tuber/matching.hpp"
#include "tuber/model.hpp"
#include "tuber/tape.hpp"

using namespace tuber;

namespace {

TubeRConfig desk_config() {
    TubeRConfig cfg;  // defaults are the desk-scale model
    cfg.validate();
    return cfg;
}

std::vector<GroundTruthTube> two_tubes(const TubeRConfig& cfg) {
    std::vector<GroundTruthTube> gts(2);
    for (int64_t i = 0; i < 2; ++i) {
        gts[i].class_id = i;
        for (int64_t t = 0; t < cfg.t_out; ++t) {
            const double c = 0.3 + 0.05 * static_cast<double>(t + i);
            gts[i].boxes.push_back({c, c, 0.2, 0.25});
            gts[i].visible.push_back(t >= i);
        }
    }
    return gts;
}

void BM_ModelForward(benchmark::State& state) {
    NoGradGuard guard;
    const TubeRConfig cfg = desk_config();
    TubeRModelT<float> model(cfg, 1);
    Rng rng(2);
    const Tensor clip = Tensor::randn({cfg.t_in, 32, 32, 3}, rng, 0.3);
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(clip, {}));
}

void BM_TrainStep(benchmark::State& state) {
    const TubeRConfig cfg = desk_config();
    TubeRModelT<float> model(cfg, 1);
    model.params().set_requires_grad(true);
    Rng rng(2);
    const Tensor clip = Tensor::randn({cfg.t_in, 32, 32, 3}, rng, 0.3);
    const auto gts = two_tubes(cfg);
    for (auto _ : state) {
        TapeScope<float> scope;
        const auto out = model.forward(clip, {}, true);
        Tensor loss = compute_set_loss(out.final, gts, cfg).total;
        for (const auto& aux : out.aux)
            loss = add(loss, compute_set_loss(aux, gts, cfg).total);
        scope.tape().backward_from(loss);
        model.params().zero_grad();
        benchmark::DoNotOptimize(loss);
    }
}

}  // namespace

BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
