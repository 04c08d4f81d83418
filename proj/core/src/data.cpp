#include "eprune/data.hpp"

#include "eprune/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace eprune {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out) {
    if (text.empty()) return false;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

std::uint32_t read_be32(std::istream& is, const std::string& what) {
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 4)) {
        throw DataError(DataErrc::truncated, fmt::format("{}: truncated header", what));
    }
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

void Dataset::validate() const {
    if (labels.empty()) throw DataError(DataErrc::invalid_argument, "dataset is empty");
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw DataError(DataErrc::length_mismatch,
                        fmt::format("{} feature rows but {} labels", features.rows(), labels.size()));
    }
    for (auto l : labels) {
        if (l >= class_count) {
            throw DataError(DataErrc::invalid_argument, fmt::format("label {} outside [0, {})", l, class_count));
        }
    }
    if (!features.allFinite()) throw DataError(DataErrc::non_numeric, "features contain NaN or Inf");
}

Dataset gen_blobs(std::size_t n_per_class, std::size_t classes, std::size_t dim, double spread,
                  std::uint64_t seed) {
    if (classes < 2) throw DataError(DataErrc::invalid_argument, "blobs need at least two classes");
    if (dim < 1) throw DataError(DataErrc::invalid_argument, "blobs need dim >= 1");
    if (!(spread >= 0.0)) throw DataError(DataErrc::invalid_argument, "spread must be non-negative");
    Rng center_rng(derive_seed(seed, 1));
    Rng sample_rng(derive_seed(seed, 2));

    Matrix centers(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(dim));
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        double norm = 0.0;
        do {
            for (Eigen::Index d = 0; d < centers.cols(); ++d) centers(c, d) = center_rng.normal();
            norm = centers.row(c).norm();
        } while (norm < 1e-12);
        centers.row(c) *= 3.0 / norm;
    }

    Dataset ds;
    ds.class_count = classes;
    ds.features.resize(static_cast<Eigen::Index>(n_per_class * classes), static_cast<Eigen::Index>(dim));
    ds.labels.reserve(n_per_class * classes);
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t j = 0; j < n_per_class; ++j, ++row) {
            for (Eigen::Index d = 0; d < ds.features.cols(); ++d) {
                ds.features(row, d) = centers(static_cast<Eigen::Index>(c), d) + spread * sample_rng.normal();
            }
            ds.labels.push_back(c);
        }
    }
    return ds;
}

Dataset gen_spirals(std::size_t n_per_class, double turns, double noise, std::uint64_t seed,
                    std::size_t classes) {
    if (!(turns > 0.0)) throw DataError(DataErrc::invalid_argument, "turns must be positive");
    if (classes != 2 && classes != 3) throw DataError(DataErrc::invalid_argument, "spirals support 2 or 3 classes");
    if (!(noise >= 0.0)) throw DataError(DataErrc::invalid_argument, "noise must be non-negative");
    Rng rng(seed);
    Dataset ds;
    ds.class_count = classes;
    ds.features.resize(static_cast<Eigen::Index>(n_per_class * classes), 2);
    ds.labels.reserve(n_per_class * classes);
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
        for (std::size_t j = 0; j < n_per_class; ++j, ++row) {
            const double t = n_per_class > 1 ? static_cast<double>(j) / static_cast<double>(n_per_class - 1) : 0.0;
            // Radius grows linearly from 1 to 5 so the arms never meet at the origin.
            const double radius = 1.0 + 4.0 * t;
            const double angle = 2.0 * std::numbers::pi * turns * t + phase;
            ds.features(row, 0) = radius * std::cos(angle) + noise * rng.normal();
            ds.features(row, 1) = radius * std::sin(angle) + noise * rng.normal();
            ds.labels.push_back(c);
        }
    }
    return ds;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw DataError(DataErrc::io, fmt::format("cannot open {}", path.string()));
    std::string line;
    if (!std::getline(in, line)) throw DataError(DataErrc::truncated, fmt::format("{}: missing header", path.string()));
    auto header = split_csv_line(line);
    for (auto& h : header) h = trim(h);
    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end()) {
        throw DataError(DataErrc::unknown_column,
                        fmt::format("{}: no column named '{}'", path.string(), label_column));
    }
    const auto label_pos = static_cast<std::size_t>(label_it - header.begin());
    const std::size_t width = header.size();

    std::vector<double> values;
    Dataset ds;
    std::unordered_map<std::string, std::size_t> remap;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != width) {
            throw DataError(DataErrc::ragged_row, fmt::format("{}:{}: expected {} cells, found {}", path.string(),
                                                              line_no, width, cells.size()));
        }
        for (std::size_t c = 0; c < width; ++c) {
            const auto cell = trim(cells[c]);
            double v = 0.0;
            if (!parse_double(cell, v)) {
                throw DataError(DataErrc::non_numeric,
                                fmt::format("{}:{}: '{}' is not a finite number", path.string(), line_no, cell));
            }
            if (c == label_pos) {
                auto [it, inserted] = remap.try_emplace(cell, ds.label_names.size());
                if (inserted) ds.label_names.push_back(cell);
                ds.labels.push_back(it->second);
            } else {
                values.push_back(v);
            }
        }
    }
    if (ds.labels.empty()) throw DataError(DataErrc::truncated, fmt::format("{}: no data rows", path.string()));
    const auto dim = width - 1;
    ds.features = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(ds.labels.size()),
                                     static_cast<Eigen::Index>(dim));
    ds.class_count = ds.label_names.size();
    return ds;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds, const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw DataError(DataErrc::io, fmt::format("cannot write {}", path.string()));
    for (std::size_t d = 0; d < ds.dim(); ++d) out << 'x' << d << ',';
    out << label_column << '\n';
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t d = 0; d < ds.dim(); ++d) {
            out << fmt::format("{:.17g}", ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)))
                << ',';
        }
        const auto label = ds.labels[r];
        out << (label < ds.label_names.size() ? ds.label_names[label] : std::to_string(label)) << '\n';
    }
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    std::ifstream img(images, std::ios::binary);
    if (!img) throw DataError(DataErrc::io, fmt::format("cannot open {}", images.string()));
    std::ifstream lab(labels, std::ios::binary);
    if (!lab) throw DataError(DataErrc::io, fmt::format("cannot open {}", labels.string()));

    const auto img_magic = read_be32(img, images.string());
    if (img_magic != 0x00000803u) {
        throw DataError(DataErrc::bad_magic, fmt::format("{}: magic {:#010x}, expected 0x00000803",
                                                         images.string(), img_magic));
    }
    const auto lab_magic = read_be32(lab, labels.string());
    if (lab_magic != 0x00000801u) {
        throw DataError(DataErrc::bad_magic, fmt::format("{}: magic {:#010x}, expected 0x00000801",
                                                         labels.string(), lab_magic));
    }
    const auto n = read_be32(img, images.string());
    const auto rows = read_be32(img, images.string());
    const auto cols = read_be32(img, images.string());
    const auto n_labels = read_be32(lab, labels.string());
    if (n != n_labels) {
        throw DataError(DataErrc::length_mismatch, fmt::format("{} images but {} labels", n, n_labels));
    }
    if (n == 0) throw DataError(DataErrc::truncated, "IDX files hold no samples");

    const std::size_t pixels = std::size_t{rows} * cols;
    std::vector<unsigned char> buf(pixels * n);
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
        throw DataError(DataErrc::truncated, fmt::format("{}: truncated pixel data", images.string()));
    }
    std::vector<unsigned char> lbuf(n);
    if (!lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(lbuf.size()))) {
        throw DataError(DataErrc::truncated, fmt::format("{}: truncated label data", labels.string()));
    }

    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
    for (std::size_t i = 0; i < buf.size(); ++i) ds.features.data()[i] = static_cast<double>(buf[i]) / 255.0;
    ds.labels.assign(lbuf.begin(), lbuf.end());
    ds.class_count = static_cast<std::size_t>(*std::max_element(lbuf.begin(), lbuf.end())) + 1;
    return ds;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
    Dataset out;
    out.class_count = ds.class_count;
    out.label_names = ds.label_names;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), ds.features.cols());
    out.labels.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        out.features.row(static_cast<Eigen::Index>(r)) = ds.features.row(static_cast<Eigen::Index>(indices[r]));
        out.labels.push_back(ds.labels[indices[r]]);
    }
    return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw DataError(DataErrc::invalid_argument, "test fraction must lie in (0, 1)");
    }
    const auto order = batch_iter(ds.size(), ds.size(), seed).front();
    const auto n_test = static_cast<std::size_t>(std::lround(static_cast<double>(ds.size()) * test_fraction));
    std::span<const std::size_t> all(order);
    return {subset(ds, all.subspan(n_test)), subset(ds, all.first(n_test))};
}

std::vector<Batch> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed) {
    if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(epoch_seed);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    std::vector<Batch> batches;
    batches.reserve((n + batch_size - 1) / batch_size);
    for (std::size_t start = 0; start < n; start += batch_size) {
        const auto end = std::min(n, start + batch_size);
        batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                             perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

BatchView gather(const Dataset& ds, std::span<const std::size_t> indices) {
    BatchView b;
    b.inputs.resize(static_cast<Eigen::Index>(indices.size()), ds.features.cols());
    b.targets.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        b.inputs.row(static_cast<Eigen::Index>(r)) = ds.features.row(static_cast<Eigen::Index>(indices[r]));
        b.targets.push_back(ds.labels[indices[r]]);
    }
    return b;
}

}  // namespace eprune
