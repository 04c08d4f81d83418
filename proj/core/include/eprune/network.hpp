#pragma once

#include "eprune/common.hpp"
#include "eprune/data.hpp"

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace eprune {

enum class Activation { relu, identity };

std::string_view to_string(Activation a);

struct DenseLayer {
    Matrix weights;  // out_width x in_width
    Vector biases;   // out_width
    Activation activation = Activation::relu;
    bool maskable = true;

    std::size_t in_width() const { return static_cast<std::size_t>(weights.cols()); }
    std::size_t out_width() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t param_count() const { return out_width() * in_width() + out_width(); }
};

/// Binary pruning mask over the prunable (hidden) units. Bit d = 1 keeps unit d.
class StateVector {
public:
    StateVector() = default;
    explicit StateVector(std::size_t length, bool value = true) : bits_(length, value ? 1 : 0) {}
    StateVector(std::initializer_list<int> bits);
    explicit StateVector(std::vector<std::uint8_t> bits);

    static StateVector ones(std::size_t length) { return StateVector(length, true); }
    static StateVector zeros(std::size_t length) { return StateVector(length, false); }

    std::size_t size() const { return bits_.size(); }
    bool operator[](std::size_t d) const { return bits_[d] != 0; }
    void set(std::size_t d, bool value) { bits_[d] = value ? 1 : 0; }
    void flip(std::size_t d) { bits_[d] ^= 1; }

    std::size_t count_ones() const;
    std::span<const std::uint8_t> bits() const { return bits_; }

    /// "0101..." rendering, one character per bit.
    std::string to_string() const;
    static StateVector parse(std::string_view text);

    /// FNV-1a over the bits; stable across platforms.
    std::uint64_t hash() const;

    /// True when every bit set here is also set in `other`.
    bool subset_of(const StateVector& other) const;

    friend bool operator==(const StateVector&, const StateVector&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// Maps mask bits to hidden units: layer-major, unit-minor over the maskable layers.
struct UnitLayout {
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> widths;

    std::size_t total() const;
    std::size_t layer_count() const { return widths.size(); }
};

class Network {
public:
    Network() = default;

    /// Assembles a network from explicit layers. Validates the layer invariants.
    Network(std::size_t input_dim, std::vector<DenseLayer> layers);

    /// input -> hidden (relu, maskable) ... -> classes (identity, not maskable).
    /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
    static Network make_mlp(std::size_t input_dim, std::span<const std::size_t> hidden,
                            std::size_t classes, std::uint64_t seed);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t class_count() const { return layers_.back().out_width(); }
    std::span<const DenseLayer> layers() const { return layers_; }
    std::span<DenseLayer> layers() { return layers_; }
    const UnitLayout& layout() const { return layout_; }
    /// D, the number of prunable units.
    std::size_t prunable_units() const { return layout_.total(); }

    std::size_t total_params() const;
    /// FNV-1a over the raw bytes of every weight and bias.
    std::uint64_t checksum() const;

    /// Re-checks every invariant; throws DimensionError or DivergenceError.
    void validate() const;

private:
    void rebuild_layout();

    std::size_t input_dim_ = 0;
    std::vector<DenseLayer> layers_;
    UnitLayout layout_;
};

/// Plain forward pass without any masking path.
Matrix forward(const Network& net, const Matrix& inputs);

/// Forward pass with hidden units gated by `mask`. Dropped units output exactly 0.
Matrix forward_masked(const Network& net, const Matrix& inputs, const StateVector& mask);

/// Per-layer parameter gradients, shaped like the network.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

struct LossAndGradient {
    double loss = 0.0;  // mean cross-entropy over the batch
    Gradients grad;
};

/// Mean softmax cross-entropy and its analytic gradient through the masked network.
/// No weight decay term is included.
LossAndGradient loss_and_gradient(const Network& net, const Matrix& inputs,
                                  std::span<const std::size_t> targets, const StateVector& mask);

/// Mean softmax cross-entropy only.
double cross_entropy(const Network& net, const Matrix& inputs,
                     std::span<const std::size_t> targets, const StateVector& mask);

/// One SGD update with L2 weight decay (applied to weights and biases):
///   theta <- theta - lr * (grad + weight_decay * theta)
/// Returns the pre-update mean cross-entropy. Throws DivergenceError on a
/// non-finite loss or gradient, leaving the network untouched.
double sgd_step(Network& net, const Matrix& inputs, std::span<const std::size_t> targets,
                const StateVector& mask, double lr, double weight_decay);

struct ParamCount {
    std::size_t kept = 0;
    std::size_t total = 0;

    /// kept / total as a fraction in [0, 1].
    double ratio() const { return total == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(total); }
};

/// A dropped unit removes its incoming weight row, its bias and its outgoing
/// weight column; weights between two dropped units are only removed once.
ParamCount count_params(const Network& net, const StateVector& mask);

/// Fraction of rows whose target is among the k largest logits. Ties between
/// equal logits rank the lower class index first.
double topk_accuracy(const Matrix& logits, std::span<const std::size_t> targets, std::size_t k);

double topk_accuracy(const Network& net, const StateVector& mask, const Dataset& data,
                     std::size_t k);

/// True if `target` is among the top-k entries of `logits` (lower index wins ties).
bool in_topk(std::span<const double> logits, std::size_t target, std::size_t k);

}  // namespace eprune
