#include "eprune/bench.hpp"
#include "eprune/trainer.hpp"

#include <benchmark/benchmark.h>

#include <array>

using namespace eprune;

static void BM_StepOneMax(benchmark::State& state) {
    const auto D = static_cast<std::size_t>(state.range(0));
    const auto obj = make_onemax(D);
    auto pop = init_population(8, D, 1);
    evaluate_population(pop, obj.evaluate);
    BdeParams params;
    std::uint64_t g = 0;
    for (auto _ : state) {
        step(pop, obj.evaluate, params, g++);
        benchmark::DoNotOptimize(pop.energies.data());
    }
}
BENCHMARK(BM_StepOneMax)->Arg(12)->Arg(128)->Arg(1024);

// One search-phase generation against the batch energy of a 2-64-64-4 net.
static void BM_StepEnergy(benchmark::State& state) {
    const auto workers = static_cast<std::size_t>(state.range(0));
    const auto data = gen_blobs(32, 4, 2, 0.3, 1);
    const std::array<std::size_t, 2> hidden{64, 64};
    const auto net = Network::make_mlp(2, hidden, 4, 1);
    const auto batch = gather(data, batch_iter(data.size(), 128, 0).front());
    const auto objective = make_energy_objective(net, batch);
    auto pop = init_population(8, net.prunable_units(), 2);
    evaluate_population(pop, objective);
    BdeParams params;
    std::uint64_t g = 0;
    for (auto _ : state) step(pop, objective, params, g++, workers);
}
BENCHMARK(BM_StepEnergy)->Arg(1)->Arg(4)->UseRealTime();
