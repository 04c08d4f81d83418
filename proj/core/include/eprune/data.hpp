#pragma once

#include "eprune/common.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eprune {

/// Labelled feature matrix. Labels are dense class indices in [0, class_count).
struct Dataset {
    Matrix features;                      // N x dim
    std::vector<std::size_t> labels;      // N
    std::size_t class_count = 0;
    /// Original label text per class index, in first-appearance order (CSV only).
    std::vector<std::string> label_names;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

    /// Throws DataError if the invariants (N >= 1, labels in range, finite
    /// features, matching row count) are violated.
    void validate() const;
};

enum class DataErrc {
    io,
    ragged_row,
    non_numeric,
    unknown_column,
    bad_magic,
    truncated,
    length_mismatch,
    invalid_argument,
};

class DataError : public std::runtime_error {
public:
    DataError(DataErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    DataErrc code() const noexcept { return code_; }

private:
    DataErrc code_;
};

/// C isotropic Gaussian clusters. Centers are seeded random directions on the
/// unit hypersphere scaled by 3; samples are class-major (n of class 0 first).
Dataset gen_blobs(std::size_t n_per_class, std::size_t classes, std::size_t dim, double spread,
                  std::uint64_t seed);

/// Interleaved Archimedean spiral arms in 2-D (classes 2 or 3).
Dataset gen_spirals(std::size_t n_per_class, double turns, double noise, std::uint64_t seed,
                    std::size_t classes = 2);

/// Comma-separated, header row, dot decimal. Every column except `label_column`
/// becomes a feature, in file order. Labels are remapped to 0..C-1 by first appearance.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);

/// Writes `ds` in the format load_csv reads; feature columns are named x0..x{dim-1}.
void write_csv(const std::filesystem::path& path, const Dataset& ds,
               const std::string& label_column = "label");

/// IDX pair: images magic 0x00000803 (u8, n x rows x cols), labels magic
/// 0x00000801 (u8, n). Pixels are scaled to [0,1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Rows of `ds` selected by `indices`, in order.
Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

/// Seeded shuffle, then the first round(N * test_fraction) rows become the test split.
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed);

/// A batch of sample indices into the owning dataset.
using Batch = std::vector<std::size_t>;

/// One epoch of batches over a fresh seeded permutation. The last batch may be
/// short; every sample appears exactly once. Produces ceil(N / batch_size) batches.
std::vector<Batch> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed);

/// Materialized batch inputs/targets.
struct BatchView {
    Matrix inputs;
    std::vector<std::size_t> targets;
};

BatchView gather(const Dataset& ds, std::span<const std::size_t> indices);

}  // namespace eprune
