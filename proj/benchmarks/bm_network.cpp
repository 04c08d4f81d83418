#include "eprune/bde.hpp"
#include "eprune/network.hpp"
#include "eprune/rng.hpp"

#include <benchmark/benchmark.h>

#include <array>

using namespace eprune;

namespace {

Matrix inputs(std::size_t n) {
    Rng rng(3);
    Matrix x(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    return x;
}

}  // namespace

static void BM_ForwardMasked(benchmark::State& state) {
    const std::array<std::size_t, 2> hidden{64, 64};
    const auto net = Network::make_mlp(2, hidden, 4, 1);
    const auto x = inputs(static_cast<std::size_t>(state.range(0)));
    const auto mask = init_population(4, net.prunable_units(), 1).states.front();
    for (auto _ : state) benchmark::DoNotOptimize(forward_masked(net, x, mask));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardMasked)->Arg(128)->Arg(2000);

static void BM_SgdStep(benchmark::State& state) {
    const std::array<std::size_t, 2> hidden{64, 64};
    auto net = Network::make_mlp(2, hidden, 4, 1);
    const auto x = inputs(128);
    std::vector<std::size_t> y(128);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 4;
    const auto mask = StateVector::ones(net.prunable_units());
    for (auto _ : state) benchmark::DoNotOptimize(sgd_step(net, x, y, mask, 1e-3, 0.0));
}
BENCHMARK(BM_SgdStep);
