#include "cli.hpp"

#include "eprune/bench.hpp"
#include "eprune/checkpoint.hpp"
#include "eprune/report.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <string_view>

namespace eprune::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kNetInitStream = 0x1417;

// ------------------------------------------------------------ strict reading

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!obj.is_object()) throw CliError(ExitCode::bad_config, fmt::format("'{}' must be an object", where));
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw CliError(ExitCode::bad_config, fmt::format("unknown key '{}' in '{}'", key, where));
    }
}

template <class T>
void take(const json& obj, const char* key, T& dst, std::string_view where) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const auto bad = [&](const char* expected) {
        return CliError(ExitCode::bad_config, fmt::format("'{}.{}' must be {}", where, key, expected));
    };
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw bad("a boolean");
        dst = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw bad("a string");
        dst = v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw bad("a number");
        dst = v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_unsigned()) throw bad("a non-negative integer");
        dst = v.get<T>();
    } else {
        // std::vector<std::size_t>
        if (!v.is_array()) throw bad("an array of non-negative integers");
        T out;
        for (const auto& e : v) {
            if (!e.is_number_unsigned()) throw bad("an array of non-negative integers");
            out.push_back(e.get<typename T::value_type>());
        }
        dst = std::move(out);
    }
}

// ------------------------------------------------------------------- output

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CliError(ExitCode::missing_file, fmt::format("cannot write {}", path.string()));
    os << text;
}

template <class F>
void write_with(const fs::path& path, F&& fn) {
    std::ostringstream ss;
    fn(ss);
    write_text(path, ss.str());
}

json eval_json(const EvalRow& row) {
    json j;
    j["loss"] = row.loss;
    for (std::size_t i = 0; i < row.topk.size(); ++i) j[fmt::format("top{}", row.topk[i])] = row.accuracy[i];
    j["R"] = 100.0 * row.kept_ratio();
    j["kept_params"] = row.kept_params;
    j["total_params"] = row.total_params;
    return j;
}

void prepare_out_dir(const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw CliError(ExitCode::missing_file, fmt::format("cannot create output directory {}", cfg.out));
    write_text(fs::path(cfg.out) / "resolved-config.json", to_json(cfg).dump(2) + "\n");
}

void require_file(const std::string& path, std::string_view what) {
    if (path.empty()) throw CliError(ExitCode::bad_config, fmt::format("{} path is not set", what));
    if (!fs::exists(path)) throw CliError(ExitCode::missing_file, fmt::format("{} not found: {}", what, path));
}


double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ----------------------------------------------------------------- commands

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto [train, test] = load_datasets(cfg.dataset);
    prepare_out_dir(cfg);
    auto result = train_epruning(cfg.train, make_network(cfg, train), train, test);

    const fs::path dir(cfg.out);
    write_with(dir / "metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, result.metrics); });
    save_checkpoint(dir / "model.ckpt", result.net);
    save_mask(dir / "mask.txt", result.mask, result.net.layout());
    const auto rows = full_and_pruned_rows("EPruning", result.net, result.mask, test);
    write_with(dir / "report.csv", [&](std::ostream& os) { write_table_csv(os, rows); });

    json summary;
    summary["command"] = "train";
    summary["config"] = to_json(cfg);
    summary["final"] = {{"test", eval_json(evaluate(result.net, result.mask, test, cfg.train.topk))},
                        {"train", eval_json(evaluate(result.net, result.mask, train, cfg.train.topk))}};
    const auto pc = count_params(result.net, result.mask);
    summary["final"]["R"] = 100.0 * pc.ratio();
    summary["final"]["kept_params"] = pc.kept;
    summary["final"]["total_params"] = pc.total;
    const auto transition = result.metrics.transition_epoch();
    summary["transition_epoch"] = transition ? json(*transition) : json(nullptr);
    summary["wall_time_seconds"] = seconds_since(t0);
    write_text(dir / "summary.json", summary.dump(2) + "\n");

    write_table_text(out, rows);
    return 0;
}

int cmd_baseline(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!(cfg.rate > 0.0 && cfg.rate <= 1.0)) throw CliError(ExitCode::bad_config, "rate must lie in (0, 1]");
    const auto [train, test] = load_datasets(cfg.dataset);
    prepare_out_dir(cfg);
    const std::size_t ft_epochs = cfg.baseline_finetune_epochs != 0
                                      ? cfg.baseline_finetune_epochs
                                      : cfg.train.epochs - cfg.train.stagnation_threshold;
    auto result = run_magnitude_baseline(cfg.train, make_network(cfg, train), cfg.rate, ft_epochs, train, test);
    if (result.prune.target_unreachable) {
        err << fmt::format("warning: target rate {} is below the smallest achievable kept ratio\n", cfg.rate);
    }

    const fs::path dir(cfg.out);
    write_with(dir / "metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, result.metrics); });
    save_checkpoint(dir / "model.ckpt", result.net);
    save_mask(dir / "mask.txt", result.prune.mask, result.net.layout());
    std::vector<TableRow> rows{
        make_table_row("Dense", result.dense, StateVector::ones(result.dense.prunable_units()), test),
        make_table_row("MagnitudePrune(P)", result.net, result.prune.mask, test)};
    write_with(dir / "report.csv", [&](std::ostream& os) { write_table_csv(os, rows); });

    json summary;
    summary["command"] = "baseline";
    summary["config"] = to_json(cfg);
    summary["final"] = {{"test", eval_json(evaluate(result.net, result.prune.mask, test, cfg.train.topk))},
                        {"dense_test", eval_json(evaluate(result.dense, StateVector::ones(result.dense.prunable_units()),
                                                          test, cfg.train.topk))}};
    const auto pc = count_params(result.net, result.prune.mask);
    summary["final"]["R"] = 100.0 * pc.ratio();
    summary["final"]["kept_params"] = pc.kept;
    summary["final"]["total_params"] = pc.total;
    summary["target_unreachable"] = result.prune.target_unreachable;
    summary["wall_time_seconds"] = seconds_since(t0);
    write_text(dir / "summary.json", summary.dump(2) + "\n");

    write_table_text(out, rows);
    return 0;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    PseudoBooleanObjective objective;
    if (cfg.bench.objective == "onemax") {
        objective = make_onemax(cfg.bench.dimension);
    } else if (cfg.bench.objective == "random_table") {
        objective = random_table_objective(cfg.bench.dimension, cfg.bench.table_seed);
    } else {
        throw CliError(ExitCode::bad_config, fmt::format("unknown bench objective '{}'", cfg.bench.objective));
    }
    prepare_out_dir(cfg);

    BenchmarkParams params;
    params.bde = cfg.train.bde;
    params.population = cfg.train.population_size;
    params.steps = cfg.bench.steps;
    params.workers = cfg.train.workers;
    std::vector<std::uint64_t> seeds(cfg.bench.seeds);
    for (std::size_t k = 0; k < seeds.size(); ++k) seeds[k] = cfg.train.seed + k;
    const auto result = run_bde_benchmark(objective, params, seeds);

    const fs::path dir(cfg.out);
    write_with(dir / "bench.csv", [&](std::ostream& os) { write_benchmark_csv(os, result); });
    json summary;
    summary["command"] = "bench";
    summary["config"] = to_json(cfg);
    summary["objective"] = objective.name;
    summary["optimum_energy"] = result.optimum_energy;
    summary["success_rate"] = result.success_rate;
    summary["wall_time_seconds"] = seconds_since(t0);
    write_text(dir / "summary.json", summary.dump(2) + "\n");

    out << fmt::format("{}: success rate {:.2f} over {} seeds ({} steps, optimum {})\n", objective.name,
                       result.success_rate, seeds.size(), params.steps, result.optimum_energy);
    return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    require_file(cfg.checkpoint, "checkpoint");
    require_file(cfg.mask, "mask");
    const auto net = load_checkpoint(cfg.checkpoint);
    UnitLayout layout;
    const auto mask = load_mask(cfg.mask, &layout);
    if (layout.widths != net.layout().widths) {
        throw CliError(ExitCode::bad_data, "mask unit layout does not match the checkpoint");
    }
    const auto [train, test] = load_datasets(cfg.dataset);
    if (test.dim() != net.input_dim() || test.class_count > net.class_count()) {
        throw CliError(ExitCode::bad_data, "dataset does not match the checkpoint");
    }
    write_table_text(out, full_and_pruned_rows("EPruning", net, mask, test));
    return 0;
}

ExitCode classify(const DataError& e) {
    return e.code() == DataErrc::io ? ExitCode::missing_file : ExitCode::bad_data;
}

std::string_view code_name(ExitCode c) {
    switch (c) {
        case ExitCode::ok: return "ok";
        case ExitCode::internal: return "internal";
        case ExitCode::bad_config: return "bad_config";
        case ExitCode::missing_file: return "missing_file";
        case ExitCode::divergence: return "divergence";
        case ExitCode::bad_data: return "bad_data";
    }
    return "internal";
}

int fail(std::ostream& err, ExitCode code, const std::string& message) {
    json j;
    j["error"] = {{"code", code_name(code)}, {"exit_code", static_cast<int>(code)}, {"message", message}};
    err << j.dump() << '\n';
    return static_cast<int>(code);
}

}  // namespace

// ---------------------------------------------------------------- config json

json to_json(const RunConfig& c) {
    const auto& d = c.dataset;
    const auto& t = c.train;
    json j;
    j["command"] = c.command;
    j["seed"] = t.seed;
    j["workers"] = t.workers;
    j["out"] = c.out;
    j["dataset"] = {{"source", d.source},           {"n_per_class", d.n_per_class},
                    {"classes", d.classes},         {"dim", d.dim},
                    {"spread", d.spread},           {"turns", d.turns},
                    {"noise", d.noise},             {"seed", d.seed},
                    {"test_fraction", d.test_fraction}, {"train_path", d.train_path},
                    {"test_path", d.test_path},     {"label_column", d.label_column},
                    {"train_images", d.train_images}, {"train_labels", d.train_labels},
                    {"test_images", d.test_images}, {"test_labels", d.test_labels}};
    j["network"] = {{"hidden", c.hidden}};
    j["train"] = {{"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"lr", t.lr},
                  {"lr_step_epochs", t.lr_step_epochs},
                  {"lr_gamma", t.lr_gamma},
                  {"weight_decay", t.weight_decay},
                  {"stagnation_threshold", t.stagnation_threshold},
                  {"population_size", t.population_size},
                  {"mutation_factor", t.bde.mutation_factor},
                  {"crossover_rate", t.bde.crossover_rate},
                  {"topk", t.topk},
                  {"reevaluate_parents", t.reevaluate_parents},
                  {"energy_aggregation", t.energy_aggregation == BatchAggregation::mean ? "mean" : "sum"}};
    j["baseline"] = {{"rate", c.rate}, {"finetune_epochs", c.baseline_finetune_epochs}};
    j["bench"] = {{"objective", c.bench.objective},
                  {"dimension", c.bench.dimension},
                  {"table_seed", c.bench.table_seed},
                  {"steps", c.bench.steps},
                  {"seeds", c.bench.seeds}};
    j["eval"] = {{"checkpoint", c.checkpoint}, {"mask", c.mask}};
    return j;
}

RunConfig from_json(const json& j, RunConfig c) {
    check_keys(j, {"command", "seed", "workers", "out", "dataset", "network", "train", "baseline", "bench", "eval"},
               "config");
    take(j, "command", c.command, "config");
    take(j, "seed", c.train.seed, "config");
    take(j, "workers", c.train.workers, "config");
    take(j, "out", c.out, "config");
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        check_keys(d, {"source", "n_per_class", "classes", "dim", "spread", "turns", "noise", "seed", "test_fraction",
                       "train_path", "test_path", "label_column", "train_images", "train_labels", "test_images",
                       "test_labels"},
                   "dataset");
        auto& s = c.dataset;
        take(d, "source", s.source, "dataset");
        take(d, "n_per_class", s.n_per_class, "dataset");
        take(d, "classes", s.classes, "dataset");
        take(d, "dim", s.dim, "dataset");
        take(d, "spread", s.spread, "dataset");
        take(d, "turns", s.turns, "dataset");
        take(d, "noise", s.noise, "dataset");
        take(d, "seed", s.seed, "dataset");
        take(d, "test_fraction", s.test_fraction, "dataset");
        take(d, "train_path", s.train_path, "dataset");
        take(d, "test_path", s.test_path, "dataset");
        take(d, "label_column", s.label_column, "dataset");
        take(d, "train_images", s.train_images, "dataset");
        take(d, "train_labels", s.train_labels, "dataset");
        take(d, "test_images", s.test_images, "dataset");
        take(d, "test_labels", s.test_labels, "dataset");
    }
    if (j.contains("network")) {
        check_keys(j.at("network"), {"hidden"}, "network");
        take(j.at("network"), "hidden", c.hidden, "network");
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t, {"epochs", "batch_size", "lr", "lr_step_epochs", "lr_gamma", "weight_decay",
                       "stagnation_threshold", "population_size", "mutation_factor", "crossover_rate", "topk",
                       "reevaluate_parents", "energy_aggregation"},
                   "train");
        auto& s = c.train;
        take(t, "epochs", s.epochs, "train");
        take(t, "batch_size", s.batch_size, "train");
        take(t, "lr", s.lr, "train");
        take(t, "lr_step_epochs", s.lr_step_epochs, "train");
        take(t, "lr_gamma", s.lr_gamma, "train");
        take(t, "weight_decay", s.weight_decay, "train");
        take(t, "stagnation_threshold", s.stagnation_threshold, "train");
        take(t, "population_size", s.population_size, "train");
        take(t, "mutation_factor", s.bde.mutation_factor, "train");
        take(t, "crossover_rate", s.bde.crossover_rate, "train");
        take(t, "topk", s.topk, "train");
        take(t, "reevaluate_parents", s.reevaluate_parents, "train");
        std::string agg = s.energy_aggregation == BatchAggregation::mean ? "mean" : "sum";
        take(t, "energy_aggregation", agg, "train");
        if (agg == "mean") {
            s.energy_aggregation = BatchAggregation::mean;
        } else if (agg == "sum") {
            s.energy_aggregation = BatchAggregation::sum;
        } else {
            throw CliError(ExitCode::bad_config, "'train.energy_aggregation' must be \"mean\" or \"sum\"");
        }
    }
    if (j.contains("baseline")) {
        check_keys(j.at("baseline"), {"rate", "finetune_epochs"}, "baseline");
        take(j.at("baseline"), "rate", c.rate, "baseline");
        take(j.at("baseline"), "finetune_epochs", c.baseline_finetune_epochs, "baseline");
    }
    if (j.contains("bench")) {
        const auto& b = j.at("bench");
        check_keys(b, {"objective", "dimension", "table_seed", "steps", "seeds"}, "bench");
        take(b, "objective", c.bench.objective, "bench");
        take(b, "dimension", c.bench.dimension, "bench");
        take(b, "table_seed", c.bench.table_seed, "bench");
        take(b, "steps", c.bench.steps, "bench");
        take(b, "seeds", c.bench.seeds, "bench");
    }
    if (j.contains("eval")) {
        check_keys(j.at("eval"), {"checkpoint", "mask"}, "eval");
        take(j.at("eval"), "checkpoint", c.checkpoint, "eval");
        take(j.at("eval"), "mask", c.mask, "eval");
    }
    return c;
}

Network make_network(const RunConfig& cfg, const Dataset& train) {
    for (auto w : cfg.hidden) {
        if (w == 0) throw CliError(ExitCode::bad_config, "hidden widths must be at least 1");
    }
    return Network::make_mlp(train.dim(), cfg.hidden, train.class_count, derive_seed(cfg.train.seed, kNetInitStream));
}

std::pair<Dataset, Dataset> load_datasets(const DatasetSpec& spec) {
    std::pair<Dataset, Dataset> out;
    if (spec.source == "blobs" || spec.source == "spirals") {
        const Dataset all = spec.source == "blobs"
                                ? gen_blobs(spec.n_per_class, spec.classes, spec.dim, spec.spread, spec.seed)
                                : gen_spirals(spec.n_per_class, spec.turns, spec.noise, spec.seed, spec.classes);
        out = train_test_split(all, spec.test_fraction, derive_seed(spec.seed, 0x5B17));
    } else if (spec.source == "csv") {
        require_file(spec.train_path, "train csv");
        auto train = load_csv(spec.train_path, spec.label_column);
        if (spec.test_path.empty()) {
            out = train_test_split(train, spec.test_fraction, derive_seed(spec.seed, 0x5B17));
        } else {
            require_file(spec.test_path, "test csv");
            auto test = load_csv(spec.test_path, spec.label_column);
            // Map test labels through the training label order.
            for (auto& l : test.labels) {
                const auto& name = test.label_names[l];
                const auto it = std::find(train.label_names.begin(), train.label_names.end(), name);
                if (it == train.label_names.end()) {
                    throw CliError(ExitCode::bad_data, fmt::format("test label '{}' not present in training data", name));
                }
                l = static_cast<std::size_t>(it - train.label_names.begin());
            }
            test.label_names = train.label_names;
            test.class_count = train.class_count;
            out = {std::move(train), std::move(test)};
        }
    } else if (spec.source == "idx") {
        require_file(spec.train_images, "train images");
        require_file(spec.train_labels, "train labels");
        auto train = load_idx(spec.train_images, spec.train_labels);
        if (spec.test_images.empty()) {
            out = train_test_split(train, spec.test_fraction, derive_seed(spec.seed, 0x5B17));
        } else {
            require_file(spec.test_images, "test images");
            require_file(spec.test_labels, "test labels");
            auto test = load_idx(spec.test_images, spec.test_labels);
            const auto C = std::max(train.class_count, test.class_count);
            train.class_count = test.class_count = C;
            out = {std::move(train), std::move(test)};
        }
    } else {
        throw CliError(ExitCode::bad_config, fmt::format("unknown dataset source '{}'", spec.source));
    }
    out.first.validate();
    out.second.validate();
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"eprune: energy-guided pruning of feedforward classifiers"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> epochs;
    std::optional<double> rate;
    std::optional<std::string> out_dir;
    std::optional<std::string> checkpoint;
    std::optional<std::string> mask;
    bool reevaluate = false;

    const std::vector<std::pair<const char*, const char*>> commands{
        {"train", "Prune while training and fine-tune the selected sub-network"},
        {"baseline", "Dense training, magnitude pruning at --rate, fine-tuning"},
        {"bench", "Binary DE on pseudo-boolean objectives against brute force"},
        {"eval", "Print full/pruned rows for a checkpoint and mask"}};
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON run configuration");
        sub->add_option("--seed", seed, "Master seed");
        sub->add_option("--workers", workers, "Worker threads for population evaluation");
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--epochs", epochs, "Training epochs");
        sub->add_option("--rate", rate, "Target kept ratio for the baseline, in (0, 1]");
        sub->add_flag("--reevaluate-parents", reevaluate, "Re-score parents on every batch");
        sub->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate");
        sub->add_option("--mask", mask, "Mask file to evaluate");
    }

    std::vector<const char*> argv{"eprune"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        return fail(err, ExitCode::bad_config, e.what());
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) {
                throw CliError(ExitCode::missing_file, fmt::format("config not found: {}", config_path));
            }
            std::ifstream is(config_path);
            json j;
            try {
                j = json::parse(is);
            } catch (const json::parse_error& e) {
                throw CliError(ExitCode::bad_config, fmt::format("{}: {}", config_path, e.what()));
            }
            cfg = from_json(j);
        }
        cfg.command = app.get_subcommands().front()->get_name();
        if (seed) cfg.train.seed = *seed;
        if (workers) cfg.train.workers = *workers;
        if (out_dir) cfg.out = *out_dir;
        if (epochs) cfg.train.epochs = *epochs;
        if (rate) cfg.rate = *rate;
        if (reevaluate) cfg.train.reevaluate_parents = true;
        if (checkpoint) cfg.checkpoint = *checkpoint;
        if (mask) cfg.mask = *mask;
        if (cfg.train.workers == 0) throw CliError(ExitCode::bad_config, "workers must be at least 1");
        try {
            cfg.train.validate();
        } catch (const std::invalid_argument& e) {
            throw CliError(ExitCode::bad_config, e.what());
        }

        if (cfg.command == "train") return cmd_train(cfg, out);
        if (cfg.command == "baseline") return cmd_baseline(cfg, out, err);
        if (cfg.command == "bench") return cmd_bench(cfg, out);
        return cmd_eval(cfg, out);
    } catch (const CliError& e) {
        return fail(err, e.code(), e.what());
    } catch (const DivergenceError& e) {
        return fail(err, ExitCode::divergence, e.what());
    } catch (const DataError& e) {
        return fail(err, classify(e), e.what());
    } catch (const FormatError& e) {
        return fail(err, ExitCode::bad_data, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(err, ExitCode::bad_config, e.what());
    } catch (const std::exception& e) {
        return fail(err, ExitCode::internal, e.what());
    }
}

}  // namespace eprune::cli
