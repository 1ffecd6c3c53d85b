#include "pathnet/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "pathnet/errors.hpp"

namespace pathnet {
namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key)) {
            throw InputError("unknown config key '" + where + key + "'");
        }
    }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

} // namespace

TaskDescriptor TaskDescriptor::from_json(const nlohmann::json& j) {
    reject_unknown_keys(
        j, {"type", "digits", "noise_prob", "dim", "stop_threshold", "task_seed"}, "task.");
    TaskDescriptor d;
    maybe(j, "type", d.type);
    if (j.contains("digits")) {
        const auto& digits = j["digits"];
        if (!digits.is_array() || digits.size() != 2) {
            throw InputError("task.digits must be a two-element array");
        }
        d.digit_a = digits[0].get<int>();
        d.digit_b = digits[1].get<int>();
    }
    maybe(j, "noise_prob", d.noise_prob);
    maybe(j, "dim", d.dim);
    maybe(j, "stop_threshold", d.stop_threshold);
    maybe(j, "task_seed", d.task_seed);
    return d;
}

TaskDescriptor TaskDescriptor::from_flag(const std::string& text) {
    // "mnist:5,6" | "xor" | "linsep:16" | "parity:8"
    TaskDescriptor d;
    const auto colon = text.find(':');
    d.type = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (d.type == "mnist") {
        if (!arg.empty()) {
            const auto comma = arg.find(',');
            if (comma == std::string::npos) {
                throw InputError("mnist task flag needs two digits, e.g. mnist:5,6");
            }
            d.digit_a = std::stoi(arg.substr(0, comma));
            d.digit_b = std::stoi(arg.substr(comma + 1));
        }
    } else if (d.type == "xor" || d.type == "linsep" || d.type == "parity") {
        d.dim = arg.empty() ? (d.type == "xor" ? 2 : 8) : std::stoi(arg);
    } else {
        throw InputError("unknown task type: " + d.type);
    }
    return d;
}

nlohmann::json TaskDescriptor::to_json() const {
    nlohmann::json j{{"type", type},
                     {"stop_threshold", stop_threshold},
                     {"task_seed", task_seed}};
    if (type == "mnist") {
        j["digits"] = {digit_a, digit_b};
        j["noise_prob"] = noise_prob;
    } else {
        j["dim"] = dim;
    }
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"schema_version", "arm", "engine", "seed", "replicas", "population",
                         "budget", "task_a", "task_b", "net", "evo", "async", "data_dir",
                         "out_dir", "save_checkpoints"},
                        "");
    if (j.contains("schema_version") && j["schema_version"].get<int>() != kSummarySchemaVersion) {
        throw InputError("unsupported config schema_version");
    }
    RunConfig cfg;
    std::string arm = "pathnet", engine = "serial";
    maybe(j, "arm", arm);
    maybe(j, "engine", engine);
    cfg.plan.arm = arm_from_name(arm);
    cfg.plan.engine = engine_from_name(engine);
    maybe(j, "seed", cfg.plan.seed);
    maybe(j, "replicas", cfg.replicas);
    maybe(j, "population", cfg.plan.population);
    maybe(j, "budget", cfg.plan.budget);
    if (j.contains("task_a")) cfg.task_a = TaskDescriptor::from_json(j["task_a"]);
    if (j.contains("task_b")) cfg.task_b = TaskDescriptor::from_json(j["task_b"]);

    if (j.contains("net")) {
        const auto& n = j["net"];
        reject_unknown_keys(n,
                            {"layers", "modules_per_layer", "neurons_per_module",
                             "max_path_width", "input_dim", "always_include_frozen"},
                            "net.");
        maybe(n, "layers", cfg.plan.net.layers);
        maybe(n, "modules_per_layer", cfg.plan.net.modules_per_layer);
        maybe(n, "neurons_per_module", cfg.plan.net.neurons_per_module);
        maybe(n, "max_path_width", cfg.plan.net.max_path_width);
        maybe(n, "input_dim", cfg.plan.net.input_dim);
        maybe(n, "always_include_frozen", cfg.plan.net.always_include_frozen);
    }
    if (j.contains("evo")) {
        const auto& e = j["evo"];
        reject_unknown_keys(e,
                            {"mutation_prob", "mutation_range", "tournament_size",
                             "eval_batches", "batch_size", "lr", "reuse_prob",
                             "duplication_rate", "utility_window"},
                            "evo.");
        maybe(e, "mutation_prob", cfg.plan.evo.mutation_prob);
        maybe(e, "mutation_range", cfg.plan.evo.mutation_range);
        maybe(e, "tournament_size", cfg.plan.evo.tournament_size);
        maybe(e, "eval_batches", cfg.plan.evo.eval_batches);
        maybe(e, "batch_size", cfg.plan.evo.batch_size);
        maybe(e, "lr", cfg.plan.evo.lr);
        maybe(e, "reuse_prob", cfg.plan.evo.reuse_prob);
        maybe(e, "duplication_rate", cfg.plan.evo.duplication_rate);
        maybe(e, "utility_window", cfg.plan.evo.utility_window);
    }
    if (j.contains("async")) {
        const auto& a = j["async"];
        reject_unknown_keys(a, {"tournament_size", "rounds_per_eval"}, "async.");
        maybe(a, "tournament_size", cfg.plan.async_tournament_size);
        maybe(a, "rounds_per_eval", cfg.plan.async_rounds_per_eval);
    }
    std::string data_dir, out_dir;
    maybe(j, "data_dir", data_dir);
    maybe(j, "out_dir", out_dir);
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    maybe(j, "save_checkpoints", cfg.save_checkpoints);

    if (cfg.replicas < 1) throw InputError("replicas must be >= 1");
    cfg.plan.net.validate();
    cfg.plan.evo.validate();
    return cfg;
}

namespace {

TaskSpec build_task(const TaskDescriptor& d, int task_id,
                    const std::filesystem::path& data_dir,
                    std::shared_ptr<const MnistData>& mnist_cache) {
    TaskSpec spec;
    if (d.type == "mnist") {
        if (!mnist_cache) {
            mnist_cache = std::make_shared<const MnistData>(load_mnist_train(data_dir));
        }
        spec = make_binary_task(mnist_cache, d.digit_a, d.digit_b, d.noise_prob,
                                d.task_seed, task_id);
    } else {
        spec = make_synthetic(synthetic_kind_from_name(d.type), d.dim, d.task_seed, task_id);
    }
    spec.stop_threshold = d.stop_threshold;
    return spec;
}

} // namespace

void RunConfig::build_tasks() {
    std::shared_ptr<const MnistData> mnist_cache;
    plan.task_a = build_task(task_a, 0, data_dir, mnist_cache);
    plan.task_b = build_task(task_b, 1, data_dir, mnist_cache);
    if (plan.task_a.input_dim != plan.task_b.input_dim) {
        throw InputError("task_a and task_b input dimensions differ");
    }
    plan.net.input_dim = plan.task_a.input_dim;
}

std::vector<nlohmann::json> execute_run(RunConfig config) {
    config.build_tasks();
    std::filesystem::create_directories(config.out_dir);

    std::vector<nlohmann::json> summaries;
    const std::uint64_t base_seed = config.plan.seed;
    for (int r = 0; r < config.replicas; ++r) {
        ExperimentPlan plan = config.plan;
        plan.seed = base_seed + static_cast<std::uint64_t>(r);
        const std::string base = run_basename(plan);
        if (config.save_checkpoints) {
            plan.checkpoint_prefix = (config.out_dir / base).string();
        }
        const TransferOutcome outcome = run_experiment(plan);

        nlohmann::json summary = summary_json(plan, outcome);
        {
            std::ofstream out(config.out_dir / (base + ".summary.json"));
            out << summary.dump(2) << "\n";
        }
        {
            std::ofstream out(config.out_dir / (base + ".records.jsonl"));
            nlohmann::json header{{"schema_version", kSummarySchemaVersion}, {"run", base}};
            out << header.dump() << "\n";
            for (const TaskRunResult* task : {&outcome.task_a, &outcome.task_b}) {
                for (const GenerationRecord& rec : task->records) {
                    nlohmann::json line = rec.to_json();
                    line["task"] = task == &outcome.task_a ? "a" : "b";
                    out << line.dump() << "\n";
                }
            }
        }
        summaries.push_back(std::move(summary));
    }
    return summaries;
}

namespace {

struct ArmStats {
    std::vector<double> totals;
    std::map<std::uint64_t, nlohmann::json> by_seed;
    int unconverged = 0;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double stddev_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

} // namespace

nlohmann::json aggregate_stats(const std::filesystem::path& summary_dir) {
    std::map<std::string, ArmStats> arms;
    for (const auto& entry : std::filesystem::directory_iterator(summary_dir)) {
        if (entry.path().filename().string().find(".summary.json") == std::string::npos) {
            continue;
        }
        std::ifstream in(entry.path());
        nlohmann::json j = nlohmann::json::parse(in);
        if (!j.contains("schema_version") ||
            j["schema_version"].get<int>() != kSummarySchemaVersion) {
            throw InputError("summary schema version mismatch: " + entry.path().string());
        }
        const std::string arm = j["plan"]["arm"].get<std::string>();
        const std::uint64_t seed = j["plan"]["seed"].get<std::uint64_t>();
        ArmStats& stats = arms[arm];
        const auto& outcome = j["outcome"];
        // unconverged runs are excluded from generation statistics
        if (outcome["converged_a"].get<bool>() && outcome["converged_b"].get<bool>()) {
            stats.totals.push_back(outcome["total"].get<double>());
            stats.by_seed[seed] = j;
        } else {
            ++stats.unconverged;
        }
    }
    if (arms.empty()) throw DataError("no summary files in " + summary_dir.string());

    nlohmann::json report{{"schema_version", kSummarySchemaVersion}, {"arms", nlohmann::json::object()}};
    for (const auto& [arm, stats] : arms) {
        if (stats.totals.empty()) {
            report["arms"][arm] = {{"runs", 0}, {"unconverged", stats.unconverged}};
            continue;
        }
        const double mean = mean_of(stats.totals);
        const double sd = stddev_of(stats.totals, mean);
        const double half =
            1.96 * sd / std::sqrt(static_cast<double>(stats.totals.size()));
        report["arms"][arm] = {{"runs", stats.totals.size()},
                               {"unconverged", stats.unconverged},
                               {"mean_total", mean},
                               {"median_total", median_of(stats.totals)},
                               {"ci95", {mean - half, mean + half}}};
    }

    // ratio-of-means speedups vs pathnet
    if (arms.count("pathnet") && !arms.at("pathnet").totals.empty()) {
        const double pn_mean = mean_of(arms.at("pathnet").totals);
        nlohmann::json speedups = nlohmann::json::object();
        for (const std::string control : {"independent", "finetune"}) {
            if (arms.count(control) && !arms.at(control).totals.empty()) {
                speedups[control] = mean_of(arms.at(control).totals) / pn_mean;
            }
        }
        report["speedup_ratio_of_means"] = std::move(speedups);
    }

    // per-seed paired ratios + overlap scatter (independent control vs pathnet)
    if (arms.count("pathnet") && arms.count("independent")) {
        nlohmann::json scatter = nlohmann::json::array();
        std::vector<double> ratios, overlaps;
        for (const auto& [seed, pn] : arms.at("pathnet").by_seed) {
            const auto it = arms.at("independent").by_seed.find(seed);
            if (it == arms.at("independent").by_seed.end()) continue;
            const double ratio = it->second["outcome"]["total"].get<double>() /
                                 pn["outcome"]["total"].get<double>();
            double overlap = 0.0;
            if (!pn["outcome"]["overlap_count"].is_null()) {
                overlap = pn["outcome"]["overlap_count"].get<double>();
            }
            ratios.push_back(ratio);
            overlaps.push_back(overlap);
            scatter.push_back({{"seed", seed}, {"speedup", ratio}, {"overlap", overlap}});
        }
        report["scatter"] = std::move(scatter);
        if (!ratios.empty()) {
            report["mean_per_seed_speedup"] = mean_of(ratios);
        }
        if (ratios.size() >= 2) {
            const double mr = mean_of(ratios), mo = mean_of(overlaps);
            double cov = 0.0, vr = 0.0, vo = 0.0;
            for (std::size_t i = 0; i < ratios.size(); ++i) {
                cov += (ratios[i] - mr) * (overlaps[i] - mo);
                vr += (ratios[i] - mr) * (ratios[i] - mr);
                vo += (overlaps[i] - mo) * (overlaps[i] - mo);
            }
            if (vr > 0.0 && vo > 0.0) {
                report["overlap_speedup_pearson_r"] = cov / std::sqrt(vr * vo);
            } else {
                report["overlap_speedup_pearson_r"] = nullptr;
            }
        }
    }
    return report;
}

std::string scatter_csv(const nlohmann::json& stats) {
    std::string csv = "seed,overlap,speedup\n";
    if (stats.contains("scatter")) {
        for (const auto& row : stats["scatter"]) {
            csv += std::to_string(row["seed"].get<std::uint64_t>()) + "," +
                   std::to_string(row["overlap"].get<double>()) + "," +
                   std::to_string(row["speedup"].get<double>()) + "\n";
        }
    }
    return csv;
}

} // namespace pathnet
