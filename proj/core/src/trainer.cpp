#include "eprune/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace eprune {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kPopulationStream = 0x5050;
constexpr std::uint64_t kBatchStream = 0xBA7C;
constexpr std::uint64_t kRepairStream = 0x2E9A;

std::vector<double> topk_row(const Matrix& logits, std::span<const std::size_t> targets,
                             std::span<const std::size_t> topk) {
    const auto C = static_cast<std::size_t>(logits.cols());
    std::vector<double> out;
    out.reserve(topk.size());
    for (auto k : topk) out.push_back(k >= C ? 1.0 : topk_accuracy(logits, targets, k));
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (lr_step_epochs == 0) throw std::invalid_argument("lr_step_epochs must be positive");
    if (!(lr_gamma > 0.0)) throw std::invalid_argument("lr_gamma must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be non-negative");
    if (stagnation_threshold > epochs) {
        throw std::invalid_argument(fmt::format("stagnation threshold {} exceeds {} epochs", stagnation_threshold, epochs));
    }
    if (population_size < kMinPopulation) {
        throw std::invalid_argument(fmt::format("population size must be at least {}", kMinPopulation));
    }
    for (auto k : topk) {
        if (k == 0) throw std::invalid_argument("top-k values must be positive");
    }
    bde.validate();
}

double TrainConfig::learning_rate(std::size_t epoch) const {
    const auto decays = (std::max<std::size_t>(epoch, 1) - 1) / lr_step_epochs;
    return lr * std::pow(lr_gamma, static_cast<double>(decays));
}

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::search: return "search";
        case Phase::finetune: return "finetune";
        case Phase::dense: return "dense";
    }
    return "unknown";
}

std::optional<std::size_t> RunMetrics::transition_epoch() const {
    for (const auto& r : rows) {
        if (r.phase == Phase::finetune) return r.epoch;
    }
    return std::nullopt;
}

void write_metrics_csv(std::ostream& os, const RunMetrics& metrics) {
    os << "epoch,phase,ce_loss,best_energy,mean_energy,delta_s";
    for (auto k : metrics.topk) os << ",train_top" << k;
    for (auto k : metrics.topk) os << ",test_top" << k;
    os << ",kept_params,total_params,R,mask_hash,energy_evals\n";
    for (const auto& r : metrics.rows) {
        os << fmt::format("{},{},{:.10g},{:.10g},{:.10g},{:.10g}", r.epoch, to_string(r.phase), r.ce_loss,
                          r.best_energy, r.mean_energy, r.delta_s);
        for (double a : r.train_topk) os << fmt::format(",{:.6f}", a);
        for (double a : r.test_topk) os << fmt::format(",{:.6f}", a);
        os << fmt::format(",{},{},{:.4f},{:016x},{}\n", r.kept_params, r.total_params, 100.0 * r.kept_ratio(),
                          r.mask_hash, r.energy_evaluations);
    }
}

Objective make_energy_objective(const Network& net, const BatchView& batch, BatchAggregation aggregation) {
    return [&net, &batch, aggregation](const StateVector& state) {
        return batch_energy_loss(forward_masked(net, batch.inputs, state), batch.targets, aggregation);
    };
}

double train_epoch(Network& net, const StateVector& mask, const TrainConfig& config, const Dataset& data,
                   std::size_t epoch) {
    const double lr = config.learning_rate(epoch);
    double loss_sum = 0.0;
    for (const auto& idx : batch_iter(data.size(), config.batch_size, derive_seed(config.seed, kBatchStream, epoch))) {
        const auto b = gather(data, idx);
        loss_sum += sgd_step(net, b.inputs, b.targets, mask, lr, config.weight_decay) * static_cast<double>(idx.size());
    }
    return loss_sum / static_cast<double>(data.size());
}

Network fine_tune(Network net, const StateVector& mask, const TrainConfig& config, const Dataset& data,
                  std::vector<double>* losses) {
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const double loss = train_epoch(net, mask, config, data, epoch);
        if (losses) losses->push_back(loss);
    }
    return net;
}

Network train_dense(Network net, const TrainConfig& config, const Dataset& data, std::vector<double>* losses) {
    const auto mask = StateVector::ones(net.prunable_units());
    return fine_tune(std::move(net), mask, config, data, losses);
}

TrainResult train_epruning(const TrainConfig& config, Network net, const Dataset& train, const Dataset& test,
                           std::optional<Population> initial) {
    config.validate();
    train.validate();
    test.validate();
    if (train.class_count != net.class_count() || test.class_count > net.class_count()) {
        throw DimensionError(fmt::format("dataset has {} classes, network has {}", train.class_count,
                                         net.class_count()));
    }
    if (train.dim() != net.input_dim() || test.dim() != net.input_dim()) {
        throw DimensionError("dataset feature width does not match the network input");
    }

    const std::size_t D = net.prunable_units();
    const auto& layout = net.layout();
    BdeParams bde = config.bde;
    bde.seed = derive_seed(config.seed, bde.seed);

    Population pop = initial ? std::move(*initial)
                             : init_population(config.population_size, D, derive_seed(config.seed, kPopulationStream));
    if (pop.size() < kMinPopulation || pop.dimension() != D) {
        throw PopulationError("initial population does not match the network");
    }
    pop.energies.clear();
    for (std::size_t i = 0; i < pop.size(); ++i) {
        Rng rng(derive_seed(config.seed, kRepairStream, i));
        repair_dead_layers(pop.states[i], layout, rng);
    }
    auto repair = [&layout](StateVector& s, Rng& rng) { repair_dead_layers(s, layout, rng); };

    TrainResult result;
    result.metrics.topk = config.topk;
    StateVector best = pop.states.front();
    ConvergenceStatus status;
    bool search_done = false;
    std::uint64_t generation = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const bool search = !search_done && (epoch == 1 || epoch <= config.stagnation_threshold);
        search_done = !search;
        const double lr = config.learning_rate(epoch);

        EpochRecord row;
        row.epoch = epoch;
        row.phase = search ? Phase::search : Phase::finetune;
        double loss_sum = 0.0;

        for (const auto& idx : batch_iter(train.size(), config.batch_size,
                                          derive_seed(config.seed, kBatchStream, epoch))) {
            const auto batch = gather(train, idx);
            if (search) {
                const Objective objective = make_energy_objective(net, batch, config.energy_aggregation);
                if (!pop.evaluated() || config.reevaluate_parents) {
                    evaluate_population(pop, objective, config.workers);
                    row.energy_evaluations += pop.size();
                }
                ++generation;
                const auto stats = step(
                    pop, objective, bde, [&](std::size_t i) { return Rng(derive_seed(bde.seed, generation, i)); },
                    config.workers, repair);
                row.energy_evaluations += stats.evaluations;
                best = pop.best();
            }
            loss_sum += sgd_step(net, batch.inputs, batch.targets, best, lr, config.weight_decay) *
                        static_cast<double>(idx.size());
        }

        if (search) {
            const auto current = delta_s(pop);
            status.delta_s = current.delta_s;
            status.converged = current.converged;
            if (status.converged) {
                search_done = true;
            } else {
                ++status.epochs_without_convergence;
            }
        }

        row.ce_loss = loss_sum / static_cast<double>(train.size());
        row.best_energy = pop.best_energy();
        row.mean_energy = pop.mean_energy();
        row.delta_s = status.delta_s;
        row.train_topk = topk_row(forward_masked(net, train.features, best), train.labels, config.topk);
        row.test_topk = topk_row(forward_masked(net, test.features, best), test.labels, config.topk);
        const auto pc = count_params(net, best);
        row.kept_params = pc.kept;
        row.total_params = pc.total;
        row.mask_hash = best.hash();
        result.metrics.rows.push_back(std::move(row));
    }

    result.net = std::move(net);
    result.mask = std::move(best);
    return result;
}

MagnitudePruneResult magnitude_prune_baseline(const Network& net, double target_R) {
    if (!(target_R > 0.0 && target_R <= 1.0)) throw std::invalid_argument("target_R must lie in (0, 1]");
    struct Unit {
        double score;
        std::size_t bit;  // layer-major, so ordering by bit is ordering by (layer, index)
    };
    std::vector<Unit> units;
    units.reserve(net.prunable_units());
    std::size_t maskable_index = 0;
    for (const auto& layer : net.layers()) {
        if (!layer.maskable) continue;
        const auto offset = net.layout().offsets[maskable_index++];
        for (std::size_t u = 0; u < layer.out_width(); ++u) {
            const auto r = static_cast<Eigen::Index>(u);
            units.push_back({layer.weights.row(r).cwiseAbs().sum() + std::abs(layer.biases(r)), offset + u});
        }
    }
    std::stable_sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) {
        return a.score < b.score || (a.score == b.score && a.bit < b.bit);
    });

    MagnitudePruneResult out{StateVector::ones(net.prunable_units()), false};
    auto reached = [&] { return count_params(net, out.mask).ratio() <= target_R; };
    for (const auto& u : units) {
        if (reached()) return out;
        out.mask.set(u.bit, false);
    }
    out.target_unreachable = !reached();
    return out;
}

BaselineResult run_magnitude_baseline(const TrainConfig& config, Network net, double target_R,
                                      std::size_t finetune_epochs, const Dataset& train, const Dataset& test) {
    config.validate();
    train.validate();
    test.validate();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    BaselineResult result;
    result.metrics.topk = config.topk;

    auto record = [&](std::size_t epoch, Phase phase, double loss, const Network& n, const StateVector& mask) {
        EpochRecord row;
        row.epoch = epoch;
        row.phase = phase;
        row.ce_loss = loss;
        row.best_energy = row.mean_energy = row.delta_s = nan;
        row.train_topk = topk_row(forward_masked(n, train.features, mask), train.labels, config.topk);
        row.test_topk = topk_row(forward_masked(n, test.features, mask), test.labels, config.topk);
        const auto pc = count_params(n, mask);
        row.kept_params = pc.kept;
        row.total_params = pc.total;
        row.mask_hash = mask.hash();
        result.metrics.rows.push_back(std::move(row));
    };

    const auto ones = StateVector::ones(net.prunable_units());
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        record(epoch, Phase::dense, train_epoch(net, ones, config, train, epoch), net, ones);
    }
    result.dense = net;
    result.prune = magnitude_prune_baseline(net, target_R);
    // Fine-tuning continues the epoch numbering and the learning-rate schedule.
    for (std::size_t k = 1; k <= finetune_epochs; ++k) {
        const auto epoch = config.epochs + k;
        record(epoch, Phase::finetune, train_epoch(net, result.prune.mask, config, train, epoch), net,
               result.prune.mask);
    }
    result.net = std::move(net);
    return result;
}

EvalRow evaluate(const Network& net, const StateVector& mask, const Dataset& data, std::span<const std::size_t> topk) {
    const Matrix logits = forward_masked(net, data.features, mask);
    EvalRow row;
    row.loss = cross_entropy(net, data.features, data.labels, mask);
    row.topk.assign(topk.begin(), topk.end());
    row.accuracy = topk_row(logits, data.labels, topk);
    const auto pc = count_params(net, mask);
    row.kept_params = pc.kept;
    row.total_params = pc.total;
    return row;
}

}  // namespace eprune
