// Command line front end: run experiments, aggregate results, inspect grid
// checkpoints, and verify the MNIST data files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "pathnet/checkpoint.hpp"
#include "pathnet/errors.hpp"
#include "pathnet/run_config.hpp"
#include "pathnet/tasks.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

fs::path default_data_dir() {
    if (const char* env = std::getenv("PATHNET_DATA_DIR")) return env;
    return "data/mnist";
}

int cmd_run(const std::string& config_file, const std::string& arm, const std::string& engine,
            long seed, int replicas, const std::string& task_a, const std::string& task_b,
            long budget, const std::string& data_dir, const std::string& out_dir,
            bool save_checkpoints) {
    nlohmann::json j = nlohmann::json::object();
    if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) {
            std::cerr << "error: cannot open config file " << config_file << "\n";
            return kExitData;
        }
        j = nlohmann::json::parse(in);
    }
    // flags win over file values
    if (!arm.empty()) j["arm"] = arm;
    if (!engine.empty()) j["engine"] = engine;
    if (seed >= 0) j["seed"] = seed;
    if (replicas > 0) j["replicas"] = replicas;
    if (budget > 0) j["budget"] = budget;
    if (!out_dir.empty()) j["out_dir"] = out_dir;
    if (save_checkpoints) j["save_checkpoints"] = true;
    if (!data_dir.empty()) {
        j["data_dir"] = data_dir;
    } else if (!j.contains("data_dir")) {
        j["data_dir"] = default_data_dir().string();
    }

    pathnet::RunConfig config = pathnet::RunConfig::from_json(j);
    if (!task_a.empty()) config.task_a = pathnet::TaskDescriptor::from_flag(task_a);
    if (!task_b.empty()) config.task_b = pathnet::TaskDescriptor::from_flag(task_b);

    const auto summaries = pathnet::execute_run(config);
    for (const auto& summary : summaries) {
        const auto& o = summary["outcome"];
        std::cout << summary["plan"]["arm"].get<std::string>() << " seed "
                  << summary["plan"]["seed"] << ": gens_a=" << o["gens_task_a"]
                  << " gens_b=" << o["gens_task_b"] << " total=" << o["total"]
                  << " converged=" << (o["converged_a"].get<bool>() && o["converged_b"].get<bool>())
                  << "\n";
    }
    std::cout << "wrote " << summaries.size() << " run(s) to " << config.out_dir.string()
              << "\n";
    return kExitOk;
}

int cmd_stats(const std::string& dir, const std::string& out_file) {
    const nlohmann::json report = pathnet::aggregate_stats(dir);
    std::cout << report.dump(2) << "\n";
    if (!out_file.empty()) {
        std::ofstream out(out_file);
        out << report.dump(2) << "\n";
        const fs::path csv_path = fs::path(out_file).replace_extension(".scatter.csv");
        std::ofstream csv(csv_path);
        csv << pathnet::scatter_csv(report);
        std::cout << "wrote " << out_file << " and " << csv_path.string() << "\n";
    }
    return kExitOk;
}

int cmd_inspect(const std::string& checkpoint) {
    const pathnet::ParameterGrid grid = pathnet::Checkpoint::load(checkpoint);
    const pathnet::NetConfig& cfg = grid.config();
    std::cout << "grid: L=" << cfg.layers << " M=" << cfg.modules_per_layer
              << " neurons=" << cfg.neurons_per_module << " N=" << cfg.max_path_width
              << " input_dim=" << cfg.input_dim
              << " always_include_frozen=" << cfg.always_include_frozen << "\n";
    std::cout << "frozen modules: " << grid.frozen_count() << " total\n";
    for (int l = 0; l < cfg.layers; ++l) {
        std::cout << "  layer " << l << ":";
        int n = 0;
        for (int m = 0; m < cfg.modules_per_layer; ++m) {
            if (grid.is_frozen(l, m)) {
                std::cout << " " << m;
                ++n;
            }
        }
        std::cout << (n == 0 ? " (none)" : "") << "\n";
    }
    std::cout << "heads:";
    for (const auto& [task, head] : grid.heads()) {
        std::cout << " task" << task << "(" << head.W.rows() << " classes)";
    }
    std::cout << (grid.heads().empty() ? " (none)" : "") << "\n";
    return kExitOk;
}

int cmd_fetch_data(const std::string& dir_flag) {
    const fs::path dir = dir_flag.empty() ? default_data_dir() : fs::path(dir_flag);
    std::cout << "MNIST IDX files are expected in: " << dir.string() << "\n"
              << "  train-images-idx3-ubyte (47,040,016 bytes)\n"
              << "  train-labels-idx1-ubyte (60,008 bytes)\n\n"
              << "This tool performs no network access. Download the gzipped files from\n"
              << "a mirror, e.g.:\n"
              << "  https://ossci-datasets.s3.amazonaws.com/mnist/train-images-idx3-ubyte.gz\n"
              << "  https://ossci-datasets.s3.amazonaws.com/mnist/train-labels-idx1-ubyte.gz\n"
              << "then gunzip them into the directory above (see scripts/fetch_mnist.sh).\n\n";
    try {
        const pathnet::MnistData data = pathnet::load_mnist_train(dir);
        std::cout << "verified: " << data.images.count << " images, " << data.images.rows
                  << "x" << data.images.cols << ", " << data.labels.size() << " labels\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cout << "not yet usable: " << e.what() << "\n";
        return kExitData;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PathNet: evolving pathways through a modular network"};
    app.require_subcommand(1);

    std::string config_file, arm, engine, task_a, task_b, data_dir, out_dir;
    long seed = -1, budget = -1;
    int replicas = -1;
    bool save_checkpoints = false;
    CLI::App* run = app.add_subcommand("run", "execute an experiment plan");
    run->add_option("--config", config_file, "JSON config file");
    run->add_option("--arm", arm, "independent | finetune | pathnet");
    run->add_option("--engine", engine, "serial | async");
    run->add_option("--seed", seed, "base seed (replicas use seed, seed+1, ...)");
    run->add_option("--replicas", replicas, "number of seeded replicas");
    run->add_option("--task-a", task_a, "task flag, e.g. mnist:5,6 | xor | linsep:16");
    run->add_option("--task-b", task_b, "task flag for the second task");
    run->add_option("--budget", budget, "max generations per task");
    run->add_option("--data-dir", data_dir, "MNIST IDX directory");
    run->add_option("--out", out_dir, "output directory");
    run->add_flag("--checkpoints", save_checkpoints, "save grid checkpoints");

    std::string stats_dir, stats_out;
    CLI::App* stats = app.add_subcommand("stats", "aggregate summary files");
    stats->add_option("dir", stats_dir, "directory of *.summary.json files")->required();
    stats->add_option("--out", stats_out, "write the report JSON (and scatter CSV) here");

    std::string checkpoint;
    CLI::App* inspect = app.add_subcommand("inspect", "describe a grid checkpoint");
    inspect->add_option("checkpoint", checkpoint, "checkpoint file")->required();

    std::string fetch_dir;
    CLI::App* fetch = app.add_subcommand("fetch-data", "print download instructions and verify data");
    fetch->add_option("--data-dir", fetch_dir, "MNIST IDX directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) {
            return cmd_run(config_file, arm, engine, seed, replicas, task_a, task_b, budget,
                           data_dir, out_dir, save_checkpoints);
        }
        if (stats->parsed()) return cmd_stats(stats_dir, stats_out);
        if (inspect->parsed()) return cmd_inspect(checkpoint);
        if (fetch->parsed()) return cmd_fetch_data(fetch_dir);
    } catch (const pathnet::InputError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const pathnet::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const pathnet::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
