#include "eprune/checkpoint.hpp"

#include <fmt/format.h>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace eprune {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr int kMaskVersion = 1;

template <class T>
T expect_field(std::istream& is, const std::string& key) {
    std::string got;
    T value{};
    if (!(is >> got) || got != key) throw FormatError(fmt::format("expected '{}', found '{}'", key, got));
    if (!(is >> value)) throw FormatError(fmt::format("missing value after '{}'", key));
    return value;
}

double read_number(std::istream& is) {
    std::string token;
    if (!(is >> token)) throw FormatError("truncated checkpoint");
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        throw FormatError(fmt::format("bad number '{}'", token));
    }
    if (used != token.size()) throw FormatError(fmt::format("bad number '{}'", token));
    return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Network& net) {
    os << "eprune-checkpoint " << kCheckpointVersion << '\n';
    os << "input_dim " << net.input_dim() << '\n';
    os << "layers " << net.layers().size() << '\n';
    for (const auto& layer : net.layers()) {
        os << fmt::format("layer {} {} {} {}\n", layer.out_width(), layer.in_width(),
                          to_string(layer.activation), layer.maskable ? 1 : 0);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                os << (c ? " " : "") << fmt::format("{:.17g}", layer.weights(r, c));
            }
            os << '\n';
        }
        for (Eigen::Index i = 0; i < layer.biases.size(); ++i) {
            os << (i ? " " : "") << fmt::format("{:.17g}", layer.biases(i));
        }
        os << '\n';
    }
}

Network read_checkpoint(std::istream& is) {
    const auto version = expect_field<int>(is, "eprune-checkpoint");
    if (version != kCheckpointVersion) {
        throw FormatError(fmt::format("unsupported checkpoint version {}", version));
    }
    const auto input_dim = expect_field<std::size_t>(is, "input_dim");
    const auto count = expect_field<std::size_t>(is, "layers");
    std::vector<DenseLayer> layers;
    layers.reserve(count);
    for (std::size_t l = 0; l < count; ++l) {
        const auto out = expect_field<std::size_t>(is, "layer");
        std::size_t in = 0;
        std::string act;
        int maskable = 0;
        if (!(is >> in >> act >> maskable)) throw FormatError(fmt::format("bad header for layer {}", l));
        DenseLayer layer;
        if (act == "relu") {
            layer.activation = Activation::relu;
        } else if (act == "identity") {
            layer.activation = Activation::identity;
        } else {
            throw FormatError(fmt::format("unknown activation '{}'", act));
        }
        layer.maskable = maskable != 0;
        layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
        layer.biases.resize(static_cast<Eigen::Index>(out));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = read_number(is);
        }
        for (Eigen::Index i = 0; i < layer.biases.size(); ++i) layer.biases(i) = read_number(is);
        layers.push_back(std::move(layer));
    }
    return Network(input_dim, std::move(layers));
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    write_checkpoint(os, net);
}

Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
    return read_checkpoint(is);
}

void write_mask(std::ostream& os, const StateVector& mask, const UnitLayout& layout) {
    if (mask.size() != layout.total()) throw DimensionError("mask length disagrees with the unit layout");
    os << "eprune-mask " << kMaskVersion << '\n' << "units";
    for (auto w : layout.widths) os << ' ' << w;
    os << '\n' << mask.to_string() << '\n';
}

StateVector read_mask(std::istream& is, UnitLayout* layout) {
    const auto version = expect_field<int>(is, "eprune-mask");
    if (version != kMaskVersion) throw FormatError(fmt::format("unsupported mask version {}", version));
    std::string line;
    std::getline(is, line);  // rest of the version line
    if (!std::getline(is, line)) throw FormatError("missing units line");
    std::istringstream units(line);
    std::string key;
    units >> key;
    if (key != "units") throw FormatError("expected 'units'");
    UnitLayout parsed;
    std::size_t w = 0;
    std::size_t offset = 0;
    while (units >> w) {
        parsed.offsets.push_back(offset);
        parsed.widths.push_back(w);
        offset += w;
    }
    if (!std::getline(is, line)) throw FormatError("missing mask bits");
    StateVector mask;
    try {
        mask = StateVector::parse(line);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    if (mask.size() != parsed.total()) {
        throw FormatError(fmt::format("mask has {} bits but the layout declares {}", mask.size(), parsed.total()));
    }
    if (layout) *layout = std::move(parsed);
    return mask;
}

void save_mask(const std::filesystem::path& path, const StateVector& mask, const UnitLayout& layout) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    write_mask(os, mask, layout);
}

StateVector load_mask(const std::filesystem::path& path, UnitLayout* layout) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
    return read_mask(is, layout);
}

}  // namespace eprune
