#pragma once

#include <filesystem>
#include <string>

#include "pathnet/experiment.hpp"

#include "json.hpp"

namespace pathnet {

/// A task as named in a config file: "mnist:5,6" / "xor" / "linsep:16" /
/// "parity:8". JSON form: {"type": "mnist", "digits": [5,6], ...}.
struct TaskDescriptor {
    std::string type = "xor";
    int digit_a = 5;
    int digit_b = 6;
    double noise_prob = 0.5;
    int dim = 2;
    double stop_threshold = 0.998;
    std::uint64_t task_seed = 0;

    static TaskDescriptor from_json(const nlohmann::json& j);
    static TaskDescriptor from_flag(const std::string& text);
    nlohmann::json to_json() const;
};

/// Everything a `run` invocation needs. Parsed and validated before any
/// compute; unknown keys are rejected.
struct RunConfig {
    ExperimentPlan plan; // tasks filled in by build_tasks()
    TaskDescriptor task_a;
    TaskDescriptor task_b;
    int replicas = 1;
    std::filesystem::path data_dir = "data/mnist";
    std::filesystem::path out_dir = "out";
    bool save_checkpoints = false;

    static RunConfig from_json(const nlohmann::json& j);

    /// Resolves descriptors into TaskSpecs (loading MNIST at most once).
    void build_tasks();
};

inline constexpr int kSummarySchemaVersion = 1;

/// Executes the configured plan for every replica (seeds seed, seed+1, ...)
/// and writes {basename}.summary.json plus {basename}.records.jsonl under
/// out_dir. Returns the summary JSONs.
std::vector<nlohmann::json> execute_run(RunConfig config);

/// Aggregate report over a directory of summary files: per-arm generation
/// statistics, speedup ratios, and overlap-vs-speedup scatter rows.
nlohmann::json aggregate_stats(const std::filesystem::path& summary_dir);

/// Renders the scatter rows of aggregate_stats() as CSV.
std::string scatter_csv(const nlohmann::json& stats);

} // namespace pathnet
