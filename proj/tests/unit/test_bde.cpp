#include "eprune/bde.hpp"
#include "eprune/bench.hpp"

#include <doctest.h>

#include <cmath>
#include <deque>
#include <set>

using namespace eprune;

namespace {

// Replays scripted draws so operator outcomes can be checked by hand.
struct ScriptedSource {
    std::deque<std::size_t> indices;
    std::deque<double> reals;

    double uniform() {
        REQUIRE_FALSE(reals.empty());
        const double r = reals.front();
        reals.pop_front();
        return r;
    }
    std::size_t below(std::size_t n) {
        REQUIRE_FALSE(indices.empty());
        const auto v = indices.front();
        indices.pop_front();
        REQUIRE(v < n);
        return v;
    }
};
static_assert(RandomSource<ScriptedSource>);

Population four_states() {
    Population p;
    p.states = {StateVector{0, 0, 0, 0}, StateVector{1, 1, 0, 0}, StateVector{1, 0, 1, 0}, StateVector{1, 0, 0, 1}};
    p.energies = {0, 0, 0, 0};
    return p;
}

}  // namespace

TEST_CASE("initial population statistics") {
    const auto p = init_population(8, 100, 42);
    CHECK(p.size() == 8);
    CHECK(p.dimension() == 100);
    std::size_t ones = 0;
    for (const auto& s : p.states) ones += s.count_ones();
    const double frac = static_cast<double>(ones) / 800.0;
    CHECK(frac >= 0.35);
    CHECK(frac <= 0.65);
    CHECK_FALSE(p.evaluated());
}

TEST_CASE("initialization is reproducible") {
    const auto a = init_population(8, 64, 5);
    const auto b = init_population(8, 64, 5);
    const auto c = init_population(8, 64, 6);
    CHECK(a.states == b.states);
    CHECK(a.states != c.states);
}

TEST_CASE("populations below four are rejected") {
    CHECK_THROWS_AS(init_population(3, 10, 0), PopulationError);
    Rng rng(0);
    CHECK_THROWS_AS(draw_donors(3, 0, rng), PopulationError);
    auto p = init_population(4, 10, 0);
    p.states.pop_back();
    p.energies = {1, 2, 3};
    CHECK_THROWS_AS(step(p, onemax, BdeParams{}, 0), PopulationError);
}

TEST_CASE("donors are distinct and exclude the target") {
    Rng rng(123);
    for (int t = 0; t < 2000; ++t) {
        const std::size_t S = 4 + rng.below(6);
        const std::size_t i = rng.below(S);
        const auto d = draw_donors(S, i, rng);
        const std::set<std::size_t> uniq(d.begin(), d.end());
        CHECK(uniq.size() == 3);
        CHECK(uniq.count(i) == 0);
        for (auto v : d) CHECK(v < S);
    }
}

TEST_CASE("mutation flips donor bits only where the other donors disagree") {
    const auto p = four_states();
    BdeParams params;
    params.mutation_factor = 0.5;
    // donors s1=1100, s2=1010, s3=1001 disagree at d=2 and d=3
    ScriptedSource src{{1, 2, 3}, {0.1, 0.1, 0.4, 0.6}};
    CHECK(mutate(p, 0, params, src) == StateVector{1, 1, 1, 0});

    params.mutation_factor = 0.0;
    ScriptedSource none{{1, 2, 3}, {0.0, 0.0, 0.0, 0.0}};
    CHECK(mutate(p, 0, params, none) == StateVector{1, 1, 0, 0});

    params.mutation_factor = 1.0;
    ScriptedSource all{{1, 2, 3}, {0.99, 0.99, 0.99, 0.99}};
    CHECK(mutate(p, 0, params, all) == StateVector{1, 1, 1, 1});
}

TEST_CASE("crossover picks the mutant bit where r <= C_r") {
    const StateVector parent{0, 0, 0, 0};
    const StateVector mutant{1, 1, 1, 1};
    BdeParams params;
    params.crossover_rate = 0.5;
    ScriptedSource src{{}, {0.2, 0.5, 0.7, 0.9}};
    CHECK(crossover(parent, mutant, params, src) == StateVector{1, 1, 0, 0});

    params.crossover_rate = 0.0;
    ScriptedSource zero{{}, {0.0, 0.1, 0.5, 0.99}};
    CHECK(crossover(parent, mutant, params, zero) == StateVector{1, 0, 0, 0});

    params.crossover_rate = 1.0;
    ScriptedSource one{{}, {0.3, 0.999, 0.0, 0.7}};
    CHECK(crossover(parent, mutant, params, one) == mutant);

    Rng rng(0);
    CHECK_THROWS_AS(crossover(parent, StateVector{1, 1}, params, rng), DimensionError);
}

TEST_CASE("selection keeps the lower energy and lets ties through") {
    CHECK(select(5.0, 3.0) == Choice::trial);
    CHECK(select(3.0, 5.0) == Choice::parent);
    CHECK(select(3.0, 3.0) == Choice::trial);
    CHECK_THROWS_AS(select(3.0, std::nan("")), DivergenceError);
    CHECK_THROWS_AS(select(std::nan(""), 1.0), DivergenceError);
}

TEST_CASE("parameter validation") {
    BdeParams p;
    CHECK_NOTHROW(p.validate());
    p.mutation_factor = 1.5;
    CHECK_THROWS(p.validate());
    p.mutation_factor = 0.0;
    CHECK_NOTHROW(p.validate());
    p.crossover_rate = -0.1;
    CHECK_THROWS(p.validate());
}

TEST_CASE("best index prefers the lowest index on ties") {
    CHECK(best_index_of({3.0, 1.0, 1.0, 2.0}) == 1);
    CHECK(best_index_of({0.0, 0.0}) == 0);
}

TEST_CASE("delta_s") {
    Population p;
    p.states.assign(4, StateVector{1});
    p.energies = {-3.0, -1.0, -1.0, -1.0};
    p.best_index = best_index_of(p.energies);
    CHECK(delta_s(p).delta_s == doctest::Approx(-1.5).epsilon(1e-15));
    CHECK_FALSE(delta_s(p).converged);

    p.energies = {0.7, 0.7, 0.7, 0.7};
    p.best_index = 0;
    CHECK(delta_s(p).delta_s == 0.0);
    CHECK(delta_s(p).converged);

    Rng rng(2);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t S = 4 + rng.below(8);
        p.states.assign(S, StateVector{1});
        p.energies.resize(S);
        for (auto& e : p.energies) e = rng.normal() * 100.0;
        p.best_index = best_index_of(p.energies);
        const auto st = delta_s(p);
        CHECK(st.delta_s <= 0.0);
        CHECK_FALSE(st.converged);
    }
}

TEST_CASE("identical population is a fixed point") {
    Population p;
    p.states.assign(6, StateVector{1, 0, 1, 1, 0});
    evaluate_population(p, onemax);
    const auto before = p.states;
    for (std::uint64_t g = 0; g < 20; ++g) step(p, onemax, BdeParams{}, g);
    CHECK(p.states == before);
    CHECK(delta_s(p).converged);
}

TEST_CASE("constant objective accepts every trial") {
    auto p = init_population(8, 16, 1);
    const Objective flat = [](const StateVector&) { return 2.5; };
    evaluate_population(p, flat);
    for (std::uint64_t g = 0; g < 5; ++g) {
        const auto stats = step(p, flat, BdeParams{}, g);
        CHECK(stats.evaluations == 8);
        CHECK(stats.accepted == 8);
        CHECK(delta_s(p).delta_s == 0.0);
    }
}

TEST_CASE("accepted energies never increase") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto obj = random_table_objective(10, seed);
        BdeParams params;
        params.seed = seed;
        auto p = init_population(8, 10, seed);
        evaluate_population(p, obj.evaluate);
        for (std::uint64_t g = 0; g < 200; ++g) {
            const auto prev = p.energies;
            const double prev_best = p.best_energy();
            step(p, obj.evaluate, params, g);
            for (std::size_t i = 0; i < p.size(); ++i) CHECK(p.energies[i] <= prev[i]);
            CHECK(p.best_energy() <= prev_best);
            for (std::size_t i = 0; i < p.size(); ++i) CHECK(p.energies[i] == obj.evaluate(p.states[i]));
        }
    }
}

TEST_CASE("results do not depend on the worker count") {
    const auto obj = random_table_objective(12, 3);
    BdeParams params;
    params.seed = 77;
    auto a = init_population(8, 12, 9);
    auto b = a;
    evaluate_population(a, obj.evaluate, 1);
    evaluate_population(b, obj.evaluate, 4);
    for (std::uint64_t g = 0; g < 50; ++g) {
        step(a, obj.evaluate, params, g, 1);
        step(b, obj.evaluate, params, g, 4);
    }
    CHECK(a.states == b.states);
    CHECK(a.energies == b.energies);
}

TEST_CASE("non-finite energies fail the run") {
    auto p = init_population(4, 6, 0);
    const Objective bad = [](const StateVector& s) { return s[0] ? std::nan("") : 1.0; };
    p.states[0].set(0, true);
    CHECK_THROWS_AS(evaluate_population(p, bad), DivergenceError);
}

TEST_CASE("step requires evaluated energies") {
    auto p = init_population(4, 6, 0);
    CHECK_THROWS_AS(step(p, onemax, BdeParams{}, 0), PopulationError);
}

TEST_CASE("driver object advances the generation") {
    BinaryDifferentialEvolution de(8, 12, BdeParams{0.5, 0.9, 4});
    const auto obj = make_onemax(12);
    de.evaluate(obj.evaluate);
    for (int g = 0; g < 300; ++g) de.step(obj.evaluate);
    CHECK(de.generation() == 300);
    CHECK(de.population().best_energy() == 0.0);
}
