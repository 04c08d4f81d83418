#include "eprune/energy.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace eprune {

namespace {

void check_sample(const EnergySample& s) {
    if (s.logits.size() < 2) throw std::invalid_argument("energy sample needs at least two classes");
    if (s.target >= s.logits.size()) {
        throw std::invalid_argument(fmt::format("target {} outside [0, {})", s.target, s.logits.size()));
    }
}

}  // namespace

std::vector<double> hamiltonian(const EnergySample& sample) {
    std::vector<double> h(sample.logits.size());
    std::transform(sample.logits.begin(), sample.logits.end(), h.begin(), [](double e) { return -e; });
    return h;
}

std::vector<double> gibbs_probabilities(const EnergySample& sample, const GibbsParams& params) {
    if (!(params.beta > 0.0)) throw std::invalid_argument("beta must be positive");
    const auto h = hamiltonian(sample);
    std::vector<double> p(h.size());
    double top = -std::numeric_limits<double>::infinity();
    for (double e : h) top = std::max(top, -params.beta * e);
    double z = 0.0;
    for (std::size_t c = 0; c < h.size(); ++c) {
        p[c] = std::exp(-params.beta * h[c] - top);
        z += p[c];
    }
    for (double& v : p) v /= z;
    return p;
}

double energy_loss(const EnergySample& sample) {
    check_sample(sample);
    // H = -logits, so min over non-target energies is -max over non-target logits.
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sample.logits.size(); ++c) {
        if (c != sample.target) best_other = std::max(best_other, sample.logits[c]);
    }
    return -sample.logits[sample.target] + best_other;
}

double batch_energy_loss(std::span<const EnergySample> samples, BatchAggregation aggregation) {
    if (samples.empty()) throw std::invalid_argument("energy loss of an empty batch");
    double sum = 0.0;
    for (const auto& s : samples) sum += energy_loss(s);
    return aggregation == BatchAggregation::mean ? sum / static_cast<double>(samples.size()) : sum;
}

double batch_energy_loss(const Matrix& logits, std::span<const std::size_t> targets,
                         BatchAggregation aggregation) {
    if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
        throw DimensionError("logit rows and targets differ in length");
    }
    const auto C = static_cast<std::size_t>(logits.cols());
    std::vector<EnergySample> samples;
    samples.reserve(targets.size());
    for (std::size_t r = 0; r < targets.size(); ++r) {
        samples.push_back({std::span<const double>(logits.data() + r * C, C), targets[r]});
    }
    return batch_energy_loss(samples, aggregation);
}

}  // namespace eprune
