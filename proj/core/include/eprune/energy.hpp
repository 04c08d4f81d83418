#pragma once

#include "eprune/common.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace eprune {

/// Logits of one input together with its target class.
struct EnergySample {
    std::span<const double> logits;
    std::size_t target = 0;
};

struct GibbsParams {
    double beta = 1.0;  // inverse temperature, > 0
};

enum class BatchAggregation { mean, sum };

/// The energy function of a softmax classifier: the negated logits.
std::vector<double> hamiltonian(const EnergySample& sample);

/// p_c proportional to exp(-beta * H_c), normalized with max-subtraction.
/// beta = 1 reproduces the softmax of the logits.
std::vector<double> gibbs_probabilities(const EnergySample& sample, const GibbsParams& params = {});

/// Energy of the target class minus the lowest energy among the other classes.
/// Negative exactly when the target logit is the strict maximum.
double energy_loss(const EnergySample& sample);

/// Mean (default) or sum of the per-sample energy losses. Throws on an empty batch.
double batch_energy_loss(std::span<const EnergySample> samples,
                         BatchAggregation aggregation = BatchAggregation::mean);

/// Same as above over the rows of a logit matrix.
double batch_energy_loss(const Matrix& logits, std::span<const std::size_t> targets,
                         BatchAggregation aggregation = BatchAggregation::mean);

}  // namespace eprune
