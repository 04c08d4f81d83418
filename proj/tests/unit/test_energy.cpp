#include "eprune/energy.hpp"
#include "eprune/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace eprune;

namespace {

EnergySample sample(const std::vector<double>& logits, std::size_t t) { return {logits, t}; }

std::vector<double> random_logits(Rng& rng, std::size_t C, double scale) {
    std::vector<double> l(C);
    for (auto& v : l) v = rng.normal() * scale;
    return l;
}

}  // namespace

TEST_CASE("energy loss on worked examples") {
    const std::vector<double> a{2.0, 5.0, 1.0};
    CHECK(energy_loss(sample(a, 1)) == -3.0);
    CHECK(energy_loss(sample(a, 0)) == 3.0);
    const std::vector<double> b{0.0, 1.0, 4.0, 2.0};
    CHECK(energy_loss(sample(b, 2)) == -2.0);
    const std::vector<double> tie{1.5, 1.5};
    CHECK(energy_loss(sample(tie, 0)) == 0.0);
    CHECK(energy_loss(sample(tie, 1)) == 0.0);
}

TEST_CASE("hamiltonian is the negated logits") {
    const std::vector<double> a{2.0, -5.0, 0.25};
    CHECK(hamiltonian(sample(a, 0)) == std::vector<double>{-2.0, 5.0, -0.25});
}

TEST_CASE("batch energy aggregates by mean or sum") {
    const std::vector<double> a{2.0, 5.0, 1.0};
    const std::vector<double> b{0.0, 1.0, 4.0, 2.0};
    const std::vector<EnergySample> batch{sample(a, 1), sample(a, 0), sample(b, 2)};
    CHECK(batch_energy_loss(batch) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
    CHECK(batch_energy_loss(batch, BatchAggregation::sum) == -2.0);

    Matrix logits(3, 3);
    logits << 2, 5, 1,
              2, 5, 1,
              0, 1, 4;
    const std::vector<std::size_t> t{1, 0, 2};
    // rows: -3, 3, -3
    CHECK(batch_energy_loss(logits, t) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(batch_energy_loss(logits, t, BatchAggregation::sum) == -3.0);
}

TEST_CASE("energy input validation") {
    const std::vector<double> one{1.0};
    CHECK_THROWS(energy_loss(sample(one, 0)));
    const std::vector<double> two{1.0, 2.0};
    CHECK_THROWS(energy_loss(sample(two, 2)));
    CHECK_THROWS(batch_energy_loss(std::span<const EnergySample>{}));
}

TEST_CASE("gibbs probabilities") {
    const std::vector<double> l{std::log(2.0), 0.0};
    const auto p = gibbs_probabilities(sample(l, 0));
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    // beta = 1 equals a softmax computed independently; large logits stay finite
    Rng rng(9);
    for (int t = 0; t < 200; ++t) {
        auto logits = random_logits(rng, 2 + rng.below(8), 30.0);
        logits[0] += 700.0;
        const auto q = gibbs_probabilities(sample(logits, 0));
        const double m = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double v : logits) z += std::exp(v - m);
        double total = 0.0;
        for (std::size_t c = 0; c < logits.size(); ++c) {
            CHECK(std::abs(q[c] - std::exp(logits[c] - m) / z) <= 1e-12);
            total += q[c];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }

    // beta -> large concentrates on the lowest energy
    const std::vector<double> l3{1.0, 3.0, 2.0};
    const auto cold = gibbs_probabilities(sample(l3, 0), GibbsParams{50.0});
    CHECK(cold[1] > 0.999);
    CHECK_THROWS(gibbs_probabilities(sample(l3, 0), GibbsParams{0.0}));
}

TEST_CASE("energy sign law against the literal definition") {
    Rng rng(31337);
    for (int t = 0; t < 10000; ++t) {
        const std::size_t C = 2 + rng.below(9);
        auto logits = random_logits(rng, C, 3.0);
        if (rng.bernoulli(0.1)) logits[rng.below(C)] = logits[0];  // exercise ties
        const std::size_t target = rng.below(C);
        const double e = energy_loss(sample(logits, target));
        CHECK(e == oracle::energy_loss_by_definition(logits, target));

        bool strict_max = true;
        for (std::size_t c = 0; c < C; ++c) {
            if (c != target && logits[c] >= logits[target]) strict_max = false;
        }
        CHECK((e < 0.0) == strict_max);
    }
}

TEST_CASE("energy is invariant to a common logit shift") {
    Rng rng(4);
    for (int t = 0; t < 2000; ++t) {
        const std::size_t C = 2 + rng.below(6);
        const auto logits = random_logits(rng, C, 2.0);
        const double shift = rng.normal() * 10.0;
        auto shifted = logits;
        for (auto& v : shifted) v += shift;
        const std::size_t target = rng.below(C);
        CHECK(std::abs(energy_loss(sample(shifted, target)) - energy_loss(sample(logits, target))) <= 1e-9);
    }
}

TEST_CASE("energy decreases as the target logit rises") {
    Rng rng(6);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t C = 2 + rng.below(6);
        auto logits = random_logits(rng, C, 2.0);
        const std::size_t target = rng.below(C);
        const double before = energy_loss(sample(logits, target));
        logits[target] += 0.5 + rng.uniform();
        CHECK(energy_loss(sample(logits, target)) < before);
    }
}
