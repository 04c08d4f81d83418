#pragma once

#include "eprune/network.hpp"
#include "eprune/trainer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace eprune {

/// One line of the comparison table: Loss, Top-1, Top-3, Top-5, R, #p.
/// Accuracies and R are percentages; Top-k with k >= C is 100.
struct TableRow {
    std::string model;
    double loss = 0.0;
    double top1 = 0.0;
    double top3 = 0.0;
    double top5 = 0.0;
    double kept_percent = 0.0;
    std::size_t params = 0;
};

TableRow make_table_row(const std::string& model, const Network& net, const StateVector& mask, const Dataset& data);

/// "<name>(F)" with the all-ones mask and "<name>(P)" with `mask`.
std::vector<TableRow> full_and_pruned_rows(const std::string& name, const Network& net, const StateVector& mask,
                                           const Dataset& data);

/// CSV header: model,Loss,Top-1,Top-3,Top-5,R,#p
void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows);

/// Fixed-width text rendering of the same table.
void write_table_text(std::ostream& os, const std::vector<TableRow>& rows);

/// Compact parameter count, e.g. 4612 -> "4.6K", 11200000 -> "11.2M".
std::string format_param_count(std::size_t n);

}  // namespace eprune
