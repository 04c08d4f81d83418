#pragma once

// Binary differential evolution over pruning state vectors.
//
// One generation, for every candidate i:
//   mutate    v_d = 1 - s[i1]_d  if s[i2]_d != s[i3]_d and r_d < F_mut, else s[i1]_d
//   crossover t_d = v_d          if r'_d <= C_r,                         else s[i]_d
//   select    keep t if E(t) <= E(s[i])   (ties accept the trial)
//
// i1, i2, i3 are mutually distinct and distinct from i, so S >= 4.

#include "eprune/network.hpp"
#include "eprune/rng.hpp"

#include <fmt/format.h>

#include <array>
#include <concepts>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace eprune {

inline constexpr std::size_t kMinPopulation = 4;
inline constexpr double kConvergenceTolerance = 1e-12;

struct BdeParams {
    double mutation_factor = 0.5;  // F_mut in [0, 1]
    double crossover_rate = 0.9;   // C_r in [0, 1]
    std::uint64_t seed = 0;

    void validate() const;
};

struct Population {
    std::vector<StateVector> states;
    /// Last accepted energy per candidate; empty until the first evaluation.
    std::vector<double> energies;
    std::size_t best_index = 0;

    std::size_t size() const { return states.size(); }
    std::size_t dimension() const { return states.empty() ? 0 : states.front().size(); }
    bool evaluated() const { return !energies.empty(); }
    const StateVector& best() const { return states.at(best_index); }
    double best_energy() const { return energies.at(best_index); }
    double mean_energy() const;
};

struct ConvergenceStatus {
    double delta_s = 0.0;
    bool converged = false;
    std::size_t epochs_without_convergence = 0;
};

enum class Choice { trial, parent };

using Objective = std::function<double(const StateVector&)>;

class PopulationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// S states of D Bernoulli(0.5) bits from a generator seeded with `seed`.
Population init_population(std::size_t S, std::size_t D, std::uint64_t seed);

/// Lowest energy, lowest index on ties.
std::size_t best_index_of(const std::vector<double>& energies);

/// Scores every state with `objective` (fanned out over `workers` threads),
/// then refreshes best_index. Throws DivergenceError on a non-finite energy.
void evaluate_population(Population& pop, const Objective& objective, std::size_t workers = 1);

/// Greedy selection; ties favor the trial. Non-finite energies are a run failure.
Choice select(double parent_energy, double trial_energy);

/// best energy minus mean energy (never positive); converged when it is zero
/// within kConvergenceTolerance.
ConvergenceStatus delta_s(const Population& pop);

/// Draws three mutually distinct indices in [0, S), all different from `i`.
template <RandomSource R>
std::array<std::size_t, 3> draw_donors(std::size_t S, std::size_t i, R& rng) {
    if (S < kMinPopulation) throw PopulationError(fmt::format("population of {} is below {}", S, kMinPopulation));
    std::array<std::size_t, 3> idx{};
    for (std::size_t k = 0; k < 3; ++k) {
        std::size_t c;
        do {
            c = rng.below(S);
        } while (c == i || (k > 0 && c == idx[0]) || (k > 1 && c == idx[1]));
        idx[k] = c;
    }
    return idx;
}

/// Flip-based binary mutation of the donor s[i1], driven by the disagreement of s[i2], s[i3].
template <RandomSource R>
StateVector mutate(const Population& pop, std::size_t i, const BdeParams& params, R& rng) {
    const auto [i1, i2, i3] = draw_donors(pop.size(), i, rng);
    const auto& a = pop.states[i1];
    const auto& b = pop.states[i2];
    const auto& c = pop.states[i3];
    StateVector v = a;
    for (std::size_t d = 0; d < v.size(); ++d) {
        const double r = rng.uniform();  // drawn for every d, keeps the stream layout fixed
        if (b[d] != c[d] && r < params.mutation_factor) v.flip(d);
    }
    return v;
}

/// Uniform crossover: mutant bit where r'_d <= C_r, parent bit otherwise.
template <RandomSource R>
StateVector crossover(const StateVector& parent, const StateVector& mutant, const BdeParams& params, R& rng) {
    if (parent.size() != mutant.size()) {
        throw DimensionError(fmt::format("crossover of lengths {} and {}", parent.size(), mutant.size()));
    }
    StateVector trial = parent;
    for (std::size_t d = 0; d < trial.size(); ++d) {
        if (rng.uniform() <= params.crossover_rate) trial.set(d, mutant[d]);
    }
    return trial;
}

namespace detail {

/// Runs fn(k) for k in [0, n) over up to `workers` threads (static striping).
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace detail

struct StepStats {
    std::size_t evaluations = 0;
    std::size_t accepted = 0;
};

struct NoRepair {
    template <class R>
    void operator()(StateVector&, R&) const {}
};

/// One BDE generation. `stream_for(i)` yields the random source for candidate i
/// (independent per candidate so the result does not depend on evaluation order);
/// `repair(trial, rng)` may adjust a trial before it is scored. Exactly S objective
/// evaluations; selection writes are applied after all evaluations complete.
template <std::invocable<std::size_t> StreamFactory, class Repair = NoRepair>
StepStats step(Population& pop, const Objective& objective, const BdeParams& params,
               StreamFactory&& stream_for, std::size_t workers = 1, Repair&& repair = {}) {
    params.validate();
    if (pop.size() < kMinPopulation) {
        throw PopulationError(fmt::format("population of {} is below {}", pop.size(), kMinPopulation));
    }
    if (!pop.evaluated()) throw PopulationError("population energies must be evaluated before a step");

    const std::size_t S = pop.size();
    std::vector<StateVector> trials(S);
    for (std::size_t i = 0; i < S; ++i) {
        auto rng = stream_for(i);
        StateVector v = mutate(pop, i, params, rng);
        trials[i] = crossover(pop.states[i], v, params, rng);
        repair(trials[i], rng);
    }

    std::vector<double> trial_energy(S, 0.0);
    detail::parallel_for(S, workers, [&](std::size_t i) { trial_energy[i] = objective(trials[i]); });

    StepStats stats;
    stats.evaluations = S;
    for (std::size_t i = 0; i < S; ++i) {
        if (select(pop.energies[i], trial_energy[i]) == Choice::trial) {
            pop.states[i] = std::move(trials[i]);
            pop.energies[i] = trial_energy[i];
            ++stats.accepted;
        }
    }
    pop.best_index = best_index_of(pop.energies);
    return stats;
}

/// Seeded generation: candidate i of generation `generation` draws from
/// Rng(derive_seed(params.seed, generation, i)).
inline StepStats step(Population& pop, const Objective& objective, const BdeParams& params,
                      std::uint64_t generation, std::size_t workers = 1) {
    return step(pop, objective, params,
                [&](std::size_t i) { return Rng(derive_seed(params.seed, generation, i)); }, workers);
}

/// Owns a population and its generation counter.
class BinaryDifferentialEvolution {
public:
    BinaryDifferentialEvolution(std::size_t population_size, std::size_t dimension, BdeParams params,
                                std::size_t workers = 1);

    /// Scores the initial population; required before the first step.
    void evaluate(const Objective& objective);
    StepStats step(const Objective& objective);

    const Population& population() const { return pop_; }
    Population& population() { return pop_; }
    std::uint64_t generation() const { return generation_; }
    const BdeParams& params() const { return params_; }

private:
    BdeParams params_;
    std::size_t workers_;
    Population pop_;
    std::uint64_t generation_ = 0;
};

}  // namespace eprune
