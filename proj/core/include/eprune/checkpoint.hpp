#pragma once

#include "eprune/network.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

namespace eprune {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Text checkpoint, version 1 (layout in docs/formats.md):
///
///   eprune-checkpoint 1
///   input_dim <n>
///   layers <L>
///   layer <out> <in> <relu|identity> <maskable 0|1>     (repeated L times, each
///   <out lines of `in` weights, row-major>               followed by its weights
///   <one line of `out` biases>                           and biases)
///
/// Numbers are written with 17 significant digits, so a save/load round trip
/// reproduces every double exactly.
void write_checkpoint(std::ostream& os, const Network& net);
Network read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

/// Mask file: "eprune-mask 1", then "units <w_1> ... <w_L>", then one line of D
/// characters in {0,1}.
void write_mask(std::ostream& os, const StateVector& mask, const UnitLayout& layout);
StateVector read_mask(std::istream& is, UnitLayout* layout = nullptr);

void save_mask(const std::filesystem::path& path, const StateVector& mask, const UnitLayout& layout);
StateVector load_mask(const std::filesystem::path& path, UnitLayout* layout = nullptr);

}  // namespace eprune
