#include "psld/decomposition.hpp"
#include "psld/model.hpp"
#include "psld/rss.hpp"

#include <benchmark/benchmark.h>

using namespace psld;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(r, c);
    for (double& x : m.data()) x = rng.normal();
    return m;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_Decompose(benchmark::State& state) {
    DecomposerConfig cfg;
    cfg.kind = state.range(0) == 0 ? DecomposerKind::mvd : DecomposerKind::stl;
    const Matrix y = random_matrix(32 * 64, 36, 3);
    for (auto _ : state) benchmark::DoNotOptimize(decompose(y, cfg));
    state.SetLabel(to_string(cfg.kind));
}
BENCHMARK(BM_Decompose)->Arg(0)->Arg(1);

// One optimisation step worth of work: 32 windows x 64 variables.
void BM_ForwardBackward(benchmark::State& state) {
    ModelShape shape;
    shape.kind = state.range(0) == 0 ? DecomposerKind::mvd : DecomposerKind::stl;
    shape.mode = state.range(1) == 0 ? HeadMode::separate : HeadMode::merged;
    shape.l_in = 36;
    shape.l_out = 36;
    Rng rng(4);
    const auto params = init_params(shape, rng);
    DecomposerConfig dcfg;
    dcfg.kind = shape.kind;
    const Matrix x = random_matrix(32 * 64, 36, 5), y = random_matrix(32 * 64, 36, 6);
    const auto xc = decompose(x, dcfg);
    const auto yc = decompose(y, dcfg);
    for (auto _ : state) {
        ForwardCache cache;
        const auto out = forward(params, xc, true, Rng(7), &cache);
        auto grads = zeros_like(params);
        benchmark::DoNotOptimize(loss_and_backward(params, out, cache, yc, y, 1.0, grads));
    }
    state.SetLabel(std::string(to_string(shape.kind)) + "/" + to_string(shape.mode));
}
BENCHMARK(BM_ForwardBackward)->Args({0, 0})->Args({1, 0})->Args({0, 1})->Unit(benchmark::kMillisecond);

void BM_RssPartition(benchmark::State& state) {
    Rng rng(8);
    auto store = generate_synthetic(static_cast<std::size_t>(state.range(0)), 600, rng);
    for (auto _ : state) benchmark::DoNotOptimize(rss_partition(store, 24, true, rng));
}
BENCHMARK(BM_RssPartition)->Arg(64)->Arg(512);

void BM_UnbiasednessCheck(benchmark::State& state) {
    Rng rng(9);
    const auto g = random_graph(50, 4, 2, 0.1, rng);
    const auto design = SampleDesign::uniform(50, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(unbiasedness_mc_check(g, design, 1000, Rng(10)));
}
BENCHMARK(BM_UnbiasednessCheck)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
