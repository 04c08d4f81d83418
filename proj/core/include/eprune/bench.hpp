#pragma once

#include "eprune/bde.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace eprune {

/// Deterministic objective over {0,1}^D; lower is better.
struct PseudoBooleanObjective {
    std::string name;
    std::size_t dimension = 0;
    Objective evaluate;
};

/// Integer code of a state: bit d contributes 2^d.
std::uint64_t state_code(const StateVector& s);
StateVector state_from_code(std::uint64_t code, std::size_t dimension);

/// D minus the number of ones; minimum 0 at all-ones.
double onemax(const StateVector& state);
PseudoBooleanObjective make_onemax(std::size_t dimension);

inline constexpr std::size_t kMaxTableDimension = 12;
inline constexpr std::size_t kMaxBruteForceDimension = 20;

/// 2^D seeded uniform [0,1) energies indexed by state_code. D <= 12.
struct RandomTable {
    std::size_t dimension = 0;
    std::vector<double> table;
};

RandomTable make_random_table(std::size_t dimension, std::uint64_t seed);
PseudoBooleanObjective random_table_objective(std::size_t dimension, std::uint64_t seed);

struct Optimum {
    StateVector state;
    double energy = 0.0;
};

/// Exhaustive scan in code order; ties keep the lowest code. D <= 20.
Optimum brute_force_optimum(const PseudoBooleanObjective& objective);

struct BenchmarkParams {
    BdeParams bde;              // bde.seed is ignored; each run uses its own seed
    std::size_t population = 8;
    std::size_t steps = 500;
    std::size_t workers = 1;
};

struct SeedRun {
    std::uint64_t seed = 0;
    bool success = false;
    /// best energy after initialization (entry 0) and after every step
    std::vector<double> best_history;
};

struct BenchmarkResult {
    double optimum_energy = 0.0;
    double success_rate = 0.0;
    std::vector<SeedRun> runs;
};

/// Runs BDE from every seed and reports how often the brute-force optimum
/// energy was reached within `steps` generations.
BenchmarkResult run_bde_benchmark(const PseudoBooleanObjective& objective, const BenchmarkParams& params,
                                  std::span<const std::uint64_t> seeds);

/// Same, against a caller-supplied optimum energy (skips brute force).
BenchmarkResult run_bde_benchmark(const PseudoBooleanObjective& objective, const BenchmarkParams& params,
                                  std::span<const std::uint64_t> seeds, double optimum_energy);

/// CSV with header "seed,step,best_energy".
void write_benchmark_csv(std::ostream& os, const BenchmarkResult& result);

}  // namespace eprune
