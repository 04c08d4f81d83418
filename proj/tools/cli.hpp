#pragma once

#include "eprune/data.hpp"
#include "eprune/network.hpp"
#include "eprune/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eprune::cli {

/// Process exit codes. Each failure class gets its own code.
enum class ExitCode : int {
    ok = 0,
    internal = 1,
    bad_config = 2,
    missing_file = 3,
    divergence = 4,
    bad_data = 5,
};

/// Carries an exit code through to run().
class CliError : public std::runtime_error {
public:
    CliError(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

struct DatasetSpec {
    std::string source = "blobs";  // blobs | spirals | csv | idx
    // generators
    std::size_t n_per_class = 625;
    std::size_t classes = 4;
    std::size_t dim = 2;
    double spread = 1.0;
    double turns = 1.5;
    double noise = 0.1;
    std::uint64_t seed = 1;
    double test_fraction = 0.2;
    // csv
    std::string train_path;
    std::string test_path;
    std::string label_column = "label";
    // idx
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
};

struct BenchSpec {
    std::string objective = "onemax";  // onemax | random_table
    std::size_t dimension = 12;
    std::uint64_t table_seed = 1;
    std::size_t steps = 500;
    std::size_t seeds = 100;
};

struct RunConfig {
    std::string command = "train";
    DatasetSpec dataset;
    std::vector<std::size_t> hidden{64, 64};
    TrainConfig train;
    std::string out = "runs/latest";
    /// Target kept ratio for the magnitude baseline.
    double rate = 0.5;
    /// Fine-tuning epochs after magnitude pruning; 0 means epochs - stagnation_threshold.
    std::size_t baseline_finetune_epochs = 0;
    BenchSpec bench;
    std::string checkpoint;
    std::string mask;
};

nlohmann::json to_json(const RunConfig& config);
/// Strict: unknown keys and wrong types raise CliError(bad_config). Missing keys keep defaults.
RunConfig from_json(const nlohmann::json& j, RunConfig base = {});

/// Builds the train and test splits described by `spec`.
std::pair<Dataset, Dataset> load_datasets(const DatasetSpec& spec);

/// Freshly initialized network for `train`, seeded from the run seed.
Network make_network(const RunConfig& config, const Dataset& train);

/// Entry point shared by the binary and the tests. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eprune::cli
