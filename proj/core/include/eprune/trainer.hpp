#pragma once

// Two-phase pruning trainer.
//
// Search phase: per batch, BDE proposes S trial masks scored by the batch energy
// loss of the masked network (weights frozen), selection keeps the better of
// trial and parent, and the best state masks the network for one SGD step.
// Once the population energies coincide (delta_s == 0) or the epoch exceeds the
// stagnation threshold, the best mask is frozen and the remaining epochs
// fine-tune that sub-network.

#include "eprune/bde.hpp"
#include "eprune/data.hpp"
#include "eprune/energy.hpp"
#include "eprune/network.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

namespace eprune {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    double lr = 0.1;
    std::size_t lr_step_epochs = 50;
    double lr_gamma = 0.1;
    double weight_decay = 1e-6;
    /// Epoch budget for the mask search (delta_s_T). Epoch 1 always searches.
    std::size_t stagnation_threshold = 100;
    std::size_t population_size = 8;
    BdeParams bde{};
    std::uint64_t seed = 0;
    std::vector<std::size_t> topk{1, 3, 5};
    /// Re-score parents on the current batch before selection instead of
    /// comparing against their energies from earlier batches.
    bool reevaluate_parents = false;
    BatchAggregation energy_aggregation = BatchAggregation::mean;
    std::size_t workers = 1;

    void validate() const;
    /// Step decay: lr * gamma^floor((epoch - 1) / lr_step_epochs), epochs 1-based.
    double learning_rate(std::size_t epoch) const;
};

/// `dense` marks unmasked pre-training epochs of the magnitude baseline.
enum class Phase { search, finetune, dense };
std::string_view to_string(Phase p);

struct EpochRecord {
    std::size_t epoch = 0;
    Phase phase = Phase::search;
    double ce_loss = 0.0;
    double best_energy = 0.0;
    double mean_energy = 0.0;
    double delta_s = 0.0;
    std::vector<double> train_topk;
    std::vector<double> test_topk;
    std::size_t kept_params = 0;
    std::size_t total_params = 0;
    std::uint64_t mask_hash = 0;
    /// Objective evaluations spent on the mask search during this epoch.
    std::size_t energy_evaluations = 0;

    double kept_ratio() const {
        return total_params == 0 ? 0.0 : static_cast<double>(kept_params) / static_cast<double>(total_params);
    }
};

struct RunMetrics {
    std::vector<std::size_t> topk;
    std::vector<EpochRecord> rows;

    /// First fine-tuning epoch, if the run reached that phase.
    std::optional<std::size_t> transition_epoch() const;
};

/// One row per epoch. Header:
/// epoch,phase,ce_loss,best_energy,mean_energy,delta_s,train_top<k>...,test_top<k>...,
/// kept_params,total_params,R,mask_hash,energy_evals
void write_metrics_csv(std::ostream& os, const RunMetrics& metrics);

struct TrainResult {
    Network net;
    StateVector mask;
    RunMetrics metrics;
};

/// Batch energy loss of `net` masked by a candidate state. Never modifies the network.
Objective make_energy_objective(const Network& net, const BatchView& batch,
                                BatchAggregation aggregation = BatchAggregation::mean);

/// If a candidate zeroes every unit of some hidden layer, switch one unit of
/// that layer (chosen by `rng`) back on.
template <RandomSource R>
void repair_dead_layers(StateVector& state, const UnitLayout& layout, R& rng) {
    for (std::size_t l = 0; l < layout.layer_count(); ++l) {
        bool any = false;
        for (std::size_t u = 0; u < layout.widths[l] && !any; ++u) any = state[layout.offsets[l] + u];
        if (!any) state.set(layout.offsets[l] + rng.below(layout.widths[l]), true);
    }
}

/// Full pruning run. `initial` overrides the Bernoulli(0.5) initial population.
TrainResult train_epruning(const TrainConfig& config, Network net, const Dataset& train, const Dataset& test,
                           std::optional<Population> initial = std::nullopt);

/// One pass of masked SGD over a seeded permutation of `data`; returns the
/// sample-weighted mean cross-entropy.
double train_epoch(Network& net, const StateVector& mask, const TrainConfig& config, const Dataset& data,
                   std::size_t epoch);

/// Masked SGD for `config.epochs` epochs with the mask held fixed.
/// Per-epoch mean losses are appended to `losses` when given.
Network fine_tune(Network net, const StateVector& mask, const TrainConfig& config, const Dataset& data,
                  std::vector<double>* losses = nullptr);

/// Dense training: fine_tune with the all-ones mask.
Network train_dense(Network net, const TrainConfig& config, const Dataset& data,
                    std::vector<double>* losses = nullptr);

struct MagnitudePruneResult {
    StateVector mask;
    /// Set when even the all-zeros mask keeps more than target_R.
    bool target_unreachable = false;
};

/// Unit-level magnitude pruning. Scores each hidden unit by the L1 norm of its
/// incoming weights plus |bias| and drops units from the lowest score up (ties:
/// lower layer, then lower index) until kept/total <= target_R.
MagnitudePruneResult magnitude_prune_baseline(const Network& net, double target_R);

struct EvalRow {
    double loss = 0.0;
    std::vector<std::size_t> topk;
    std::vector<double> accuracy;  // parallel to topk; k >= C counts as 1.0
    std::size_t kept_params = 0;
    std::size_t total_params = 0;

    double kept_ratio() const {
        return total_params == 0 ? 0.0 : static_cast<double>(kept_params) / static_cast<double>(total_params);
    }
};

struct BaselineResult {
    Network dense;          // after dense training, before pruning
    Network net;            // pruned and fine-tuned
    MagnitudePruneResult prune;
    RunMetrics metrics;     // dense epochs followed by fine-tuning epochs
};

/// Dense training for `config.epochs`, magnitude pruning to `target_R`, then
/// `finetune_epochs` of masked SGD. Energy columns of the metrics are NaN.
BaselineResult run_magnitude_baseline(const TrainConfig& config, Network net, double target_R,
                                      std::size_t finetune_epochs, const Dataset& train, const Dataset& test);

EvalRow evaluate(const Network& net, const StateVector& mask, const Dataset& data,
                 std::span<const std::size_t> topk);

}  // namespace eprune
