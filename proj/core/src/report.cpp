#include "eprune/report.hpp"

#include <fmt/format.h>

#include <array>
#include <ostream>

namespace eprune {

TableRow make_table_row(const std::string& model, const Network& net, const StateVector& mask, const Dataset& data) {
    constexpr std::array<std::size_t, 3> ks{1, 3, 5};
    const auto row = evaluate(net, mask, data, ks);
    return {model,
            row.loss,
            100.0 * row.accuracy[0],
            100.0 * row.accuracy[1],
            100.0 * row.accuracy[2],
            100.0 * row.kept_ratio(),
            row.kept_params};
}

std::vector<TableRow> full_and_pruned_rows(const std::string& name, const Network& net, const StateVector& mask,
                                           const Dataset& data) {
    return {make_table_row(name + "(F)", net, StateVector::ones(net.prunable_units()), data),
            make_table_row(name + "(P)", net, mask, data)};
}

void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows) {
    os << "model,Loss,Top-1,Top-3,Top-5,R,#p\n";
    for (const auto& r : rows) {
        os << fmt::format("{},{:.4f},{:.2f},{:.2f},{:.2f},{:.2f},{}\n", r.model, r.loss, r.top1, r.top3, r.top5,
                          r.kept_percent, r.params);
    }
}

void write_table_text(std::ostream& os, const std::vector<TableRow>& rows) {
    os << fmt::format("{:<28} {:>8} {:>7} {:>7} {:>7} {:>7} {:>8}\n", "Model", "Loss", "Top-1", "Top-3", "Top-5",
                      "R", "#p");
    for (const auto& r : rows) {
        os << fmt::format("{:<28} {:>8.4f} {:>7.2f} {:>7.2f} {:>7.2f} {:>7.2f} {:>8}\n", r.model, r.loss, r.top1,
                          r.top3, r.top5, r.kept_percent, format_param_count(r.params));
    }
}

std::string format_param_count(std::size_t n) {
    if (n >= 1'000'000) return fmt::format("{:.1f}M", static_cast<double>(n) / 1e6);
    if (n >= 1'000) return fmt::format("{:.1f}K", static_cast<double>(n) / 1e3);
    return std::to_string(n);
}

}  // namespace eprune
