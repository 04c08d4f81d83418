#include "eprune/bde.hpp"

#include <algorithm>
#include <exception>
#include <mutex>

namespace eprune {

void BdeParams::validate() const {
    // 0 is accepted as the degenerate "never flip" factor.
    if (!(mutation_factor >= 0.0 && mutation_factor <= 1.0)) {
        throw std::invalid_argument(fmt::format("mutation factor {} outside [0, 1]", mutation_factor));
    }
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) {
        throw std::invalid_argument(fmt::format("crossover rate {} outside [0, 1]", crossover_rate));
    }
}

double Population::mean_energy() const {
    double sum = 0.0;
    for (double e : energies) sum += e;
    return sum / static_cast<double>(energies.size());
}

Population init_population(std::size_t S, std::size_t D, std::uint64_t seed) {
    if (S < kMinPopulation) throw PopulationError(fmt::format("population of {} is below {}", S, kMinPopulation));
    if (D == 0) throw PopulationError("state dimension must be positive");
    Rng rng(seed);
    Population pop;
    pop.states.reserve(S);
    for (std::size_t i = 0; i < S; ++i) {
        StateVector s = StateVector::zeros(D);
        for (std::size_t d = 0; d < D; ++d) s.set(d, rng.bernoulli(0.5));
        pop.states.push_back(std::move(s));
    }
    return pop;
}

std::size_t best_index_of(const std::vector<double>& energies) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < energies.size(); ++i) {
        if (energies[i] < energies[best]) best = i;
    }
    return best;
}

void evaluate_population(Population& pop, const Objective& objective, std::size_t workers) {
    std::vector<double> energies(pop.size(), 0.0);
    detail::parallel_for(pop.size(), workers, [&](std::size_t i) { energies[i] = objective(pop.states[i]); });
    for (std::size_t i = 0; i < energies.size(); ++i) {
        if (!std::isfinite(energies[i])) {
            throw DivergenceError(fmt::format("candidate {} has non-finite energy {}", i, energies[i]));
        }
    }
    pop.energies = std::move(energies);
    pop.best_index = best_index_of(pop.energies);
}

Choice select(double parent_energy, double trial_energy) {
    if (!std::isfinite(parent_energy) || !std::isfinite(trial_energy)) {
        throw DivergenceError(fmt::format("non-finite energy in selection (parent {}, trial {})",
                                          parent_energy, trial_energy));
    }
    return trial_energy <= parent_energy ? Choice::trial : Choice::parent;
}

ConvergenceStatus delta_s(const Population& pop) {
    if (!pop.evaluated()) throw PopulationError("delta_s needs evaluated energies");
    // Summing non-negative gaps to the best keeps the result <= 0 and exactly 0
    // when all energies coincide, with no cancellation between best and mean.
    const double best = pop.energies[best_index_of(pop.energies)];
    double gap = 0.0;
    for (double e : pop.energies) gap += e - best;
    ConvergenceStatus st;
    st.delta_s = -gap / static_cast<double>(pop.energies.size());
    st.converged = std::abs(st.delta_s) <= kConvergenceTolerance;
    return st;
}

namespace detail {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t k = w; k < n; k += workers) fn(k);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

BinaryDifferentialEvolution::BinaryDifferentialEvolution(std::size_t population_size, std::size_t dimension,
                                                         BdeParams params, std::size_t workers)
    : params_(params), workers_(workers),
      pop_(init_population(population_size, dimension, derive_seed(params.seed, 0xB0B))) {
    params_.validate();
}

void BinaryDifferentialEvolution::evaluate(const Objective& objective) {
    evaluate_population(pop_, objective, workers_);
}

StepStats BinaryDifferentialEvolution::step(const Objective& objective) {
    ++generation_;
    return eprune::step(pop_, objective, params_, generation_, workers_);
}

}  // namespace eprune
