#include "eprune/bench.hpp"

#include <fmt/format.h>

#include <memory>
#include <ostream>

namespace eprune {

std::uint64_t state_code(const StateVector& s) {
    if (s.size() > 64) throw DimensionError("state too long for an integer code");
    std::uint64_t code = 0;
    for (std::size_t d = 0; d < s.size(); ++d) {
        if (s[d]) code |= std::uint64_t{1} << d;
    }
    return code;
}

StateVector state_from_code(std::uint64_t code, std::size_t dimension) {
    StateVector s = StateVector::zeros(dimension);
    for (std::size_t d = 0; d < dimension; ++d) s.set(d, (code >> d) & 1u);
    return s;
}

double onemax(const StateVector& state) {
    return static_cast<double>(state.size() - state.count_ones());
}

PseudoBooleanObjective make_onemax(std::size_t dimension) {
    return {"onemax", dimension, [dimension](const StateVector& s) {
                if (s.size() != dimension) throw DimensionError("onemax dimension mismatch");
                return onemax(s);
            }};
}

RandomTable make_random_table(std::size_t dimension, std::uint64_t seed) {
    if (dimension == 0 || dimension > kMaxTableDimension) {
        throw std::invalid_argument(fmt::format("random table dimension {} outside [1, {}]", dimension,
                                                kMaxTableDimension));
    }
    Rng rng(seed);
    RandomTable t;
    t.dimension = dimension;
    t.table.resize(std::size_t{1} << dimension);
    for (auto& v : t.table) v = rng.uniform();
    return t;
}

PseudoBooleanObjective random_table_objective(std::size_t dimension, std::uint64_t seed) {
    auto table = std::make_shared<const RandomTable>(make_random_table(dimension, seed));
    return {fmt::format("random_table_d{}_s{}", dimension, seed), dimension,
            [table](const StateVector& s) {
                if (s.size() != table->dimension) throw DimensionError("random table dimension mismatch");
                return table->table[state_code(s)];
            }};
}

Optimum brute_force_optimum(const PseudoBooleanObjective& objective) {
    const auto D = objective.dimension;
    if (D == 0 || D > kMaxBruteForceDimension) {
        throw std::invalid_argument(fmt::format("brute force dimension {} outside [1, {}]", D,
                                                kMaxBruteForceDimension));
    }
    Optimum best{state_from_code(0, D), objective.evaluate(state_from_code(0, D))};
    const std::uint64_t n = std::uint64_t{1} << D;
    for (std::uint64_t code = 1; code < n; ++code) {
        auto s = state_from_code(code, D);
        const double e = objective.evaluate(s);
        if (e < best.energy) best = {std::move(s), e};
    }
    return best;
}

BenchmarkResult run_bde_benchmark(const PseudoBooleanObjective& objective, const BenchmarkParams& params,
                                  std::span<const std::uint64_t> seeds) {
    return run_bde_benchmark(objective, params, seeds, brute_force_optimum(objective).energy);
}

BenchmarkResult run_bde_benchmark(const PseudoBooleanObjective& objective, const BenchmarkParams& params,
                                  std::span<const std::uint64_t> seeds, double optimum_energy) {
    BenchmarkResult result;
    result.optimum_energy = optimum_energy;
    result.runs.resize(seeds.size());
    // Seeds are independent; each run is itself single-threaded.
    detail::parallel_for(seeds.size(), params.workers, [&](std::size_t k) {
        BdeParams bde = params.bde;
        bde.seed = seeds[k];
        BinaryDifferentialEvolution opt(params.population, objective.dimension, bde);
        opt.evaluate(objective.evaluate);
        SeedRun run;
        run.seed = seeds[k];
        run.best_history.reserve(params.steps + 1);
        run.best_history.push_back(opt.population().best_energy());
        for (std::size_t t = 0; t < params.steps; ++t) {
            opt.step(objective.evaluate);
            run.best_history.push_back(opt.population().best_energy());
        }
        run.success = run.best_history.back() <= optimum_energy;
        result.runs[k] = std::move(run);
    });
    std::size_t hits = 0;
    for (const auto& r : result.runs) hits += r.success ? 1 : 0;
    result.success_rate = seeds.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(seeds.size());
    return result;
}

void write_benchmark_csv(std::ostream& os, const BenchmarkResult& result) {
    os << "seed,step,best_energy\n";
    for (const auto& run : result.runs) {
        for (std::size_t t = 0; t < run.best_history.size(); ++t) {
            os << fmt::format("{},{},{:.17g}\n", run.seed, t, run.best_history[t]);
        }
    }
}

}  // namespace eprune
