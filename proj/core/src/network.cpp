#include "eprune/network.hpp"

#include "eprune/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace eprune {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

void check_mask(const Network& net, const StateVector& mask) {
    if (mask.size() != net.prunable_units()) {
        throw DimensionError(fmt::format("mask length {} does not match {} prunable units",
                                         mask.size(), net.prunable_units()));
    }
}

void check_inputs(const Network& net, const Matrix& inputs) {
    if (static_cast<std::size_t>(inputs.cols()) != net.input_dim()) {
        throw DimensionError(fmt::format("input width {} does not match network input_dim {}",
                                         inputs.cols(), net.input_dim()));
    }
}

void check_targets(const Network& net, const Matrix& inputs, std::span<const std::size_t> targets) {
    if (inputs.rows() == 0) throw DimensionError("empty batch");
    if (static_cast<std::size_t>(inputs.rows()) != targets.size()) {
        throw DimensionError(fmt::format("{} input rows but {} targets", inputs.rows(), targets.size()));
    }
    for (auto t : targets) {
        if (t >= net.class_count()) {
            throw DimensionError(fmt::format("target {} outside [0, {})", t, net.class_count()));
        }
    }
}

// Zeroes the columns of dropped units. Kept columns are not touched, so the
// all-ones mask leaves activations bit-identical to the unmasked path.
void gate_columns(Matrix& act, const StateVector& mask, std::size_t offset) {
    for (Eigen::Index j = 0; j < act.cols(); ++j) {
        if (!mask[offset + static_cast<std::size_t>(j)]) act.col(j).setZero();
    }
}

void apply_activation(Matrix& z, Activation a) {
    if (a == Activation::relu) z = z.cwiseMax(0.0);
}

Matrix affine(const Matrix& x, const DenseLayer& layer) {
    Matrix z = x * layer.weights.transpose();
    z.rowwise() += layer.biases.transpose();
    return z;
}

// Row-wise stable log-softmax.
Matrix log_softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
        out.row(r) = logits.row(r).array() - lse;
    }
    return out;
}

double mean_ce(const Matrix& logp, std::span<const std::size_t> targets) {
    double sum = 0.0;
    for (std::size_t r = 0; r < targets.size(); ++r) {
        sum -= logp(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(targets[r]));
    }
    return sum / static_cast<double>(targets.size());
}

// Forward pass keeping every post-activation (index 0 is the input).
std::vector<Matrix> forward_cached(const Network& net, const Matrix& inputs, const StateVector* mask) {
    std::vector<Matrix> acts;
    acts.reserve(net.layers().size() + 1);
    acts.push_back(inputs);
    std::size_t maskable_index = 0;
    for (const auto& layer : net.layers()) {
        Matrix z = affine(acts.back(), layer);
        apply_activation(z, layer.activation);
        if (layer.maskable) {
            if (mask) gate_columns(z, *mask, net.layout().offsets[maskable_index]);
            ++maskable_index;
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

}  // namespace

std::string_view to_string(Activation a) {
    return a == Activation::relu ? "relu" : "identity";
}

// ---------------------------------------------------------------- StateVector

StateVector::StateVector(std::initializer_list<int> bits) {
    bits_.reserve(bits.size());
    for (int b : bits) {
        if (b != 0 && b != 1) throw std::invalid_argument("state bits must be 0 or 1");
        bits_.push_back(static_cast<std::uint8_t>(b));
    }
}

StateVector::StateVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_) {
        if (b > 1) throw std::invalid_argument("state bits must be 0 or 1");
    }
}

std::size_t StateVector::count_ones() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string StateVector::to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) s[i] = '1';
    }
    return s;
}

StateVector StateVector::parse(std::string_view text) {
    std::vector<std::uint8_t> bits;
    bits.reserve(text.size());
    for (char c : text) {
        if (c != '0' && c != '1') throw std::invalid_argument("mask text must contain only '0' and '1'");
        bits.push_back(c == '1' ? 1 : 0);
    }
    return StateVector(std::move(bits));
}

std::uint64_t StateVector::hash() const {
    return fnv1a(kFnvOffset, bits_.data(), bits_.size());
}

bool StateVector::subset_of(const StateVector& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i] && !other.bits_[i]) return false;
    }
    return true;
}

std::size_t UnitLayout::total() const {
    std::size_t d = 0;
    for (auto w : widths) d += w;
    return d;
}

// -------------------------------------------------------------------- Network

Network::Network(std::size_t input_dim, std::vector<DenseLayer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
    validate();
    rebuild_layout();
}

Network Network::make_mlp(std::size_t input_dim, std::span<const std::size_t> hidden,
                          std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    std::size_t fan_in = input_dim;
    auto make_layer = [&](std::size_t fan_out, Activation act, bool maskable) {
        DenseLayer layer;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        layer.weights.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = bound * (2.0 * rng.uniform() - 1.0);
            }
        }
        layer.biases = Vector::Zero(static_cast<Eigen::Index>(fan_out));
        layer.activation = act;
        layer.maskable = maskable;
        layers.push_back(std::move(layer));
        fan_in = fan_out;
    };
    for (auto width : hidden) make_layer(width, Activation::relu, true);
    make_layer(classes, Activation::identity, false);
    return Network(input_dim, std::move(layers));
}

void Network::validate() const {
    if (input_dim_ == 0) throw DimensionError("input_dim must be positive");
    if (layers_.empty()) throw DimensionError("network needs at least the logit layer");
    std::size_t width = input_dim_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const bool last = l + 1 == layers_.size();
        if (layer.in_width() != width) {
            throw DimensionError(fmt::format("layer {} expects {} inputs, previous width is {}", l,
                                             layer.in_width(), width));
        }
        if (layer.out_width() == 0) throw DimensionError(fmt::format("layer {} has zero width", l));
        if (static_cast<std::size_t>(layer.biases.size()) != layer.out_width()) {
            throw DimensionError(fmt::format("layer {} bias length mismatch", l));
        }
        if (last) {
            if (layer.maskable) throw DimensionError("the logit layer cannot be maskable");
            if (layer.activation != Activation::identity) {
                throw DimensionError("the logit layer must use the identity activation");
            }
            if (layer.out_width() < 2) throw DimensionError("class count must be at least 2");
        } else {
            if (!layer.maskable) throw DimensionError(fmt::format("hidden layer {} must be maskable", l));
            if (layer.activation != Activation::relu) {
                throw DimensionError(fmt::format("hidden layer {} must use relu", l));
            }
        }
        if (!layer.weights.allFinite() || !layer.biases.allFinite()) {
            throw DivergenceError(fmt::format("layer {} holds non-finite parameters", l));
        }
        width = layer.out_width();
    }
}

void Network::rebuild_layout() {
    layout_ = {};
    std::size_t offset = 0;
    for (const auto& layer : layers_) {
        if (!layer.maskable) continue;
        layout_.offsets.push_back(offset);
        layout_.widths.push_back(layer.out_width());
        offset += layer.out_width();
    }
}

std::size_t Network::total_params() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.param_count();
    return n;
}

std::uint64_t Network::checksum() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& layer : layers_) {
        h = fnv1a(h, layer.weights.data(), sizeof(double) * static_cast<std::size_t>(layer.weights.size()));
        h = fnv1a(h, layer.biases.data(), sizeof(double) * static_cast<std::size_t>(layer.biases.size()));
    }
    return h;
}

// ------------------------------------------------------------------- forward

Matrix forward(const Network& net, const Matrix& inputs) {
    check_inputs(net, inputs);
    Matrix x = inputs;
    for (const auto& layer : net.layers()) {
        Matrix z = affine(x, layer);
        apply_activation(z, layer.activation);
        x = std::move(z);
    }
    return x;
}

Matrix forward_masked(const Network& net, const Matrix& inputs, const StateVector& mask) {
    check_inputs(net, inputs);
    check_mask(net, mask);
    return std::move(forward_cached(net, inputs, &mask).back());
}

// ------------------------------------------------------------------ training

LossAndGradient loss_and_gradient(const Network& net, const Matrix& inputs,
                                  std::span<const std::size_t> targets, const StateVector& mask) {
    check_inputs(net, inputs);
    check_mask(net, mask);
    check_targets(net, inputs, targets);

    const auto acts = forward_cached(net, inputs, &mask);
    const Matrix logp = log_softmax(acts.back());
    const auto batch = static_cast<double>(targets.size());

    LossAndGradient out;
    out.loss = mean_ce(logp, targets);

    // dL/dlogits = (softmax - one_hot) / B
    Matrix delta = logp.array().exp();
    for (std::size_t r = 0; r < targets.size(); ++r) {
        delta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(targets[r])) -= 1.0;
    }
    delta /= batch;

    const auto layers = net.layers();
    const std::size_t L = layers.size();
    out.grad.weights.resize(L);
    out.grad.biases.resize(L);
    std::size_t maskable_index = net.layout().layer_count();
    for (std::size_t l = L; l-- > 0;) {
        const auto& layer = layers[l];
        if (layer.maskable) {
            --maskable_index;
            // d(post-activation) -> d(pre-activation): relu derivative, then the gate.
            delta = delta.cwiseProduct((acts[l + 1].array() > 0.0).cast<double>().matrix());
            gate_columns(delta, mask, net.layout().offsets[maskable_index]);
        }
        out.grad.weights[l] = delta.transpose() * acts[l];
        out.grad.biases[l] = delta.colwise().sum().transpose();
        if (l > 0) delta = delta * layer.weights;
    }
    return out;
}

double cross_entropy(const Network& net, const Matrix& inputs, std::span<const std::size_t> targets,
                     const StateVector& mask) {
    check_targets(net, inputs, targets);
    return mean_ce(log_softmax(forward_masked(net, inputs, mask)), targets);
}

double sgd_step(Network& net, const Matrix& inputs, std::span<const std::size_t> targets,
                const StateVector& mask, double lr, double weight_decay) {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
    auto [loss, grad] = loss_and_gradient(net, inputs, targets, mask);
    if (!std::isfinite(loss)) throw DivergenceError(fmt::format("non-finite training loss ({})", loss));
    for (std::size_t l = 0; l < grad.weights.size(); ++l) {
        if (!grad.weights[l].allFinite() || !grad.biases[l].allFinite()) {
            throw DivergenceError(fmt::format("non-finite gradient in layer {}", l));
        }
    }
    auto layers = net.layers();
    std::vector<Matrix> new_weights(layers.size());
    std::vector<Vector> new_biases(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        new_weights[l] = layer.weights - lr * (grad.weights[l] + weight_decay * layer.weights);
        new_biases[l] = layer.biases - lr * (grad.biases[l] + weight_decay * layer.biases);
        if (!new_weights[l].allFinite() || !new_biases[l].allFinite()) {
            throw DivergenceError(fmt::format("layer {} diverged during the update", l));
        }
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weights = std::move(new_weights[l]);
        layers[l].biases = std::move(new_biases[l]);
    }
    return loss;
}

// ---------------------------------------------------------------- accounting

ParamCount count_params(const Network& net, const StateVector& mask) {
    check_mask(net, mask);
    ParamCount pc;
    pc.total = net.total_params();
    std::size_t active_in = net.input_dim();
    std::size_t maskable_index = 0;
    for (const auto& layer : net.layers()) {
        std::size_t active_out = layer.out_width();
        if (layer.maskable) {
            const auto offset = net.layout().offsets[maskable_index++];
            active_out = 0;
            for (std::size_t u = 0; u < layer.out_width(); ++u) active_out += mask[offset + u] ? 1 : 0;
        }
        pc.kept += active_out * active_in + active_out;
        active_in = active_out;
    }
    return pc;
}

bool in_topk(std::span<const double> logits, std::size_t target, std::size_t k) {
    const double t = logits[target];
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        if (logits[c] > t || (logits[c] == t && c < target)) ++ahead;
    }
    return ahead < k;
}

double topk_accuracy(const Matrix& logits, std::span<const std::size_t> targets, std::size_t k) {
    if (targets.empty()) throw std::invalid_argument("top-k accuracy of an empty dataset");
    if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
        throw DimensionError("logit rows and targets differ in length");
    }
    if (k == 0 || k > static_cast<std::size_t>(logits.cols())) {
        throw std::invalid_argument(fmt::format("k must lie in [1, {}]", logits.cols()));
    }
    std::size_t hits = 0;
    const auto C = static_cast<std::size_t>(logits.cols());
    for (std::size_t r = 0; r < targets.size(); ++r) {
        std::span<const double> row(logits.data() + r * C, C);
        if (in_topk(row, targets[r], k)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double topk_accuracy(const Network& net, const StateVector& mask, const Dataset& data, std::size_t k) {
    if (data.size() == 0) throw std::invalid_argument("top-k accuracy of an empty dataset");
    return topk_accuracy(forward_masked(net, data.features, mask), data.labels, k);
}

}  // namespace eprune
