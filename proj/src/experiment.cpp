#include "pathnet/experiment.hpp"

#include <algorithm>
#include <mutex>

#include "pathnet/checkpoint.hpp"
#include "pathnet/errors.hpp"

namespace pathnet {
namespace {

// stream-id tags for deriving disjoint rng streams from one run seed
constexpr std::uint64_t kGridStream = 0x67726964;
constexpr std::uint64_t kEvoStreamA = 0x65766f41;
constexpr std::uint64_t kEvoStreamB = 0x65766f42;
constexpr std::uint64_t kDataStreamA = 0x64617441;
constexpr std::uint64_t kDataStreamB = 0x64617442;
constexpr std::uint64_t kReinitStream = 0x7265696e;

double winner_fitness(const GenerationRecord& rec) {
    return rec.winner == rec.slot_a ? rec.fit_a : rec.fit_b;
}

TaskRunResult evolve_serial(ParameterGrid& grid, const TaskSpec& task,
                            const ExperimentPlan& plan, std::uint64_t data_stream,
                            std::uint64_t evo_stream, const PathGenotype* reuse_path) {
    RngStream rng(plan.seed, evo_stream);
    auto stream = task.make_stream(RngStream(plan.seed, data_stream).next_u64());
    Population pop = Population::random(plan.population, plan.net, rng);
    ModuleUtility utility(plan.net.layers, plan.net.modules_per_layer, plan.evo.utility_window);

    const SlotEvaluator evaluator = [&](int, const PathGenotype& g) {
        const double fit = evaluate_path(grid, g, task.task_id, *stream, plan.evo);
        utility.update(g, fit);
        return fit;
    };

    TaskRunResult result;
    for (long gen = 0; gen < plan.budget; ++gen) {
        GenerationRecord rec =
            tournament_step(pop, evaluator, plan.evo, plan.net, reuse_path, rng);
        rec.generation = gen;
        rec.frozen_overlap_count = frozen_overlap(grid, rec.winner_genotype);

        if (plan.evo.duplication_rate > 0.0 && rng.bernoulli(plan.evo.duplication_rate)) {
            const int layer = static_cast<int>(rng.uniform_int(0, plan.net.layers));
            duplicate_module(grid, utility, layer, rng);
        }

        const double win_fit = winner_fitness(rec);
        if (win_fit >= result.best_fitness || result.records.empty()) {
            result.best_fitness = win_fit;
            result.best = rec.winner_genotype;
        }
        result.records.push_back(std::move(rec));
        ++result.generations;
        if (win_fit >= task.stop_threshold) {
            result.converged = true;
            break;
        }
    }
    result.final_population = pop.slots;
    return result;
}

TaskRunResult evolve_async(ParameterGrid& grid, const TaskSpec& task,
                           const ExperimentPlan& plan, std::uint64_t data_stream,
                           std::uint64_t evo_stream, const PathGenotype* reuse_path) {
    RngStream rng(plan.seed, evo_stream);
    SharedPopulation pop(Population::random(plan.population, plan.net, rng).slots);
    SharedFitnessArray fitness(plan.population);

    ModuleUtility utility(plan.net.layers, plan.net.modules_per_layer, plan.evo.utility_window);
    std::mutex utility_mutex;

    AsyncParams async;
    async.tournament_size = plan.async_tournament_size;
    async.rounds_per_eval = plan.async_rounds_per_eval;
    // budget counts generations (worker rounds) across all workers
    async.round_budget = std::max<long>(
        1, plan.budget * plan.async_rounds_per_eval / std::max(1, plan.population));
    async.frozen_overlap_fn = [&grid](const PathGenotype& g) { return frozen_overlap(grid, g); };

    const std::uint64_t data_seed = RngStream(plan.seed, data_stream).next_u64();
    const WorkerEvaluatorFactory make_evaluator = [&, data_seed](int worker_id) {
        auto stream = std::shared_ptr<SampleStream>(
            task.make_stream(data_seed ^ (0x9e3779b97f4a7c15ULL * (worker_id + 1))));
        auto dup_rng = std::make_shared<RngStream>(
            RngStream(plan.seed, evo_stream ^ 0xd0b1ULL).split(worker_id));
        auto round_counter = std::make_shared<long>(0);
        return [&, stream, dup_rng, round_counter, worker_id](const PathGenotype& g) {
            const double fit = evaluate_path(grid, g, task.task_id, *stream, plan.evo);
            {
                std::lock_guard<std::mutex> lock(utility_mutex);
                utility.update(g, fit);
            }
            // module duplication is driven by worker 0's completed evaluations
            if (worker_id == 0 && plan.evo.duplication_rate > 0.0 &&
                ++*round_counter % plan.async_rounds_per_eval == 0 &&
                dup_rng->bernoulli(plan.evo.duplication_rate)) {
                std::lock_guard<std::mutex> lock(utility_mutex);
                const int layer = static_cast<int>(dup_rng->uniform_int(0, plan.net.layers));
                duplicate_module(grid, utility, layer, *dup_rng);
            }
            return fit;
        };
    };

    TaskRunResult result;
    const auto stop_when = [&](const GenerationRecord& rec) {
        return winner_fitness(rec) >= task.stop_threshold;
    };
    AsyncResult async_result = run_async(pop, fitness, make_evaluator, plan.evo, plan.net,
                                         reuse_path, async, plan.seed, stop_when);

    result.records = std::move(async_result.records);
    result.generations = static_cast<long>(result.records.size());
    result.final_population = std::move(async_result.final_population);
    for (const GenerationRecord& rec : result.records) {
        const double fit = winner_fitness(rec);
        if (fit >= result.best_fitness || result.best.layers() == 0) {
            result.best_fitness = fit;
            result.best = rec.winner_genotype;
        }
        if (fit >= task.stop_threshold) result.converged = true;
    }
    return result;
}

TaskRunResult evolve(ParameterGrid& grid, const TaskSpec& task, const ExperimentPlan& plan,
                     std::uint64_t data_stream, std::uint64_t evo_stream,
                     const PathGenotype* reuse_path) {
    return plan.engine == Engine::Serial
               ? evolve_serial(grid, task, plan, data_stream, evo_stream, reuse_path)
               : evolve_async(grid, task, plan, data_stream, evo_stream, reuse_path);
}

PathGenotype fixed_max_path(const NetConfig& cfg) {
    PathGenotype g(cfg.max_path_width, cfg.layers);
    for (int i = 0; i < cfg.max_path_width; ++i) {
        for (int l = 0; l < cfg.layers; ++l) {
            g.entry(i, l) = i;
        }
    }
    return g;
}

/// One control "generation" = two path evaluations, the same data budget as
/// one tournament. Converges when either window reaches the threshold.
TaskRunResult train_control(ParameterGrid& grid, const TaskSpec& task,
                            const ExperimentPlan& plan, std::uint64_t data_stream) {
    const PathGenotype path = fixed_max_path(plan.net);
    auto stream = task.make_stream(RngStream(plan.seed, data_stream).next_u64());

    TaskRunResult result;
    result.best = path;
    for (long gen = 0; gen < plan.budget; ++gen) {
        GenerationRecord rec;
        rec.generation = gen;
        rec.slot_a = 0;
        rec.slot_b = 0;
        rec.fit_a = evaluate_path(grid, path, task.task_id, *stream, plan.evo);
        rec.fit_b = evaluate_path(grid, path, task.task_id, *stream, plan.evo);
        rec.winner = 0;
        rec.winner_genotype = path;
        rec.frozen_overlap_count = frozen_overlap(grid, path);
        const double window_acc = std::max(rec.fit_a, rec.fit_b);
        result.best_fitness = std::max(result.best_fitness, window_acc);
        result.records.push_back(std::move(rec));
        ++result.generations;
        if (window_acc >= task.stop_threshold) {
            result.converged = true;
            break;
        }
    }
    result.final_population = {path};
    return result;
}

} // namespace

std::string arm_name(Arm arm) {
    switch (arm) {
    case Arm::Independent: return "independent";
    case Arm::Finetune: return "finetune";
    case Arm::PathNet: return "pathnet";
    }
    return "?";
}

Arm arm_from_name(const std::string& name) {
    if (name == "independent") return Arm::Independent;
    if (name == "finetune") return Arm::Finetune;
    if (name == "pathnet") return Arm::PathNet;
    throw InputError("unknown arm: " + name);
}

std::string engine_name(Engine engine) {
    return engine == Engine::Serial ? "serial" : "async";
}

Engine engine_from_name(const std::string& name) {
    if (name == "serial") return Engine::Serial;
    if (name == "async") return Engine::Async;
    throw InputError("unknown engine: " + name);
}

int overlap_metric(const std::vector<PathGenotype>& final_pop, const PathGenotype& frozen_path) {
    int count = 0;
    for (int l = 0; l < frozen_path.layers(); ++l) {
        for (int m : frozen_path.active_set(l)) {
            const bool present = std::any_of(
                final_pop.begin(), final_pop.end(), [&](const PathGenotype& g) {
                    if (l >= g.layers()) return false;
                    const std::vector<int> set = g.active_set(l);
                    return std::binary_search(set.begin(), set.end(), m);
                });
            if (present) ++count;
        }
    }
    return count;
}

std::optional<double> speedup_ratio(const TransferOutcome& control,
                                    const TransferOutcome& pathnet) {
    if (!control.converged() || !pathnet.converged()) return std::nullopt;
    return static_cast<double>(control.total()) / static_cast<double>(pathnet.total());
}

TransferOutcome run_pathnet_transfer(const ExperimentPlan& plan) {
    if (plan.arm != Arm::PathNet) throw InputError("run_pathnet_transfer: arm must be pathnet");
    plan.net.validate();
    plan.evo.validate();

    RngStream grid_rng(plan.seed, kGridStream);
    ParameterGrid grid(plan.net, grid_rng);
    grid.add_head(plan.task_a.task_id, plan.task_a.classes, grid_rng);

    TransferOutcome outcome;
    outcome.task_a = evolve(grid, plan.task_a, plan, kDataStreamA, kEvoStreamA, nullptr);

    grid.freeze_path(outcome.task_a.best);
    RngStream reinit_rng(plan.seed, kReinitStream);
    grid.reinit_unfrozen(reinit_rng);
    grid.add_head(plan.task_b.task_id, plan.task_b.classes, reinit_rng);
    if (!plan.checkpoint_prefix.empty()) {
        Checkpoint::save(grid, plan.checkpoint_prefix + ".post_task_a.grid");
    }

    const PathGenotype frozen = outcome.task_a.best;
    outcome.task_b = evolve(grid, plan.task_b, plan, kDataStreamB, kEvoStreamB, &frozen);
    outcome.overlap_count = overlap_metric(outcome.task_b.final_population, frozen);
    if (!plan.checkpoint_prefix.empty()) {
        Checkpoint::save(grid, plan.checkpoint_prefix + ".final.grid");
    }
    return outcome;
}

TransferOutcome run_control(const ExperimentPlan& plan) {
    if (plan.arm == Arm::PathNet) throw InputError("run_control: arm must be a control");
    plan.net.validate();
    plan.evo.validate();

    RngStream grid_rng(plan.seed, kGridStream);
    ParameterGrid grid(plan.net, grid_rng);
    grid.add_head(plan.task_a.task_id, plan.task_a.classes, grid_rng);

    TransferOutcome outcome;
    outcome.task_a = train_control(grid, plan.task_a, plan, kDataStreamA);

    if (plan.arm == Arm::Independent) {
        RngStream fresh_rng(plan.seed, kGridStream ^ 0xbULL);
        ParameterGrid grid_b(plan.net, fresh_rng);
        grid_b.add_head(plan.task_b.task_id, plan.task_b.classes, fresh_rng);
        outcome.task_b = train_control(grid_b, plan.task_b, plan, kDataStreamB);
    } else {
        // fine-tuning: same path and parameters continue, new head
        RngStream head_rng(plan.seed, kReinitStream);
        grid.add_head(plan.task_b.task_id, plan.task_b.classes, head_rng);
        outcome.task_b = train_control(grid, plan.task_b, plan, kDataStreamB);
    }
    if (!plan.checkpoint_prefix.empty()) {
        Checkpoint::save(grid, plan.checkpoint_prefix + ".final.grid");
    }
    return outcome;
}

TransferOutcome run_experiment(const ExperimentPlan& plan) {
    return plan.arm == Arm::PathNet ? run_pathnet_transfer(plan) : run_control(plan);
}

nlohmann::json summary_json(const ExperimentPlan& plan, const TransferOutcome& outcome) {
    const auto genotype_json = [](const PathGenotype& g) {
        nlohmann::json rows = nlohmann::json::array();
        for (int i = 0; i < g.width(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int l = 0; l < g.layers(); ++l) row.push_back(g.entry(i, l));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    nlohmann::json j{
        {"schema_version", 1},
        {"plan",
         {{"arm", arm_name(plan.arm)},
          {"engine", engine_name(plan.engine)},
          {"seed", plan.seed},
          {"population", plan.population},
          {"budget", plan.budget},
          {"task_a", plan.task_a.name},
          {"task_b", plan.task_b.name},
          {"net",
           {{"layers", plan.net.layers},
            {"modules_per_layer", plan.net.modules_per_layer},
            {"neurons_per_module", plan.net.neurons_per_module},
            {"max_path_width", plan.net.max_path_width},
            {"input_dim", plan.net.input_dim},
            {"always_include_frozen", plan.net.always_include_frozen}}},
          {"evo",
           {{"mutation_prob", plan.evo.mutation_prob_or_default(plan.net)},
            {"mutation_range", plan.evo.mutation_range},
            {"eval_batches", plan.evo.eval_batches},
            {"batch_size", plan.evo.batch_size},
            {"lr", plan.evo.lr},
            {"reuse_prob", plan.evo.reuse_prob},
            {"duplication_rate", plan.evo.duplication_rate},
            {"utility_window", plan.evo.utility_window}}}}},
        {"outcome",
         {{"gens_task_a", outcome.task_a.generations},
          {"gens_task_b", outcome.task_b.generations},
          {"total", outcome.total()},
          {"converged_a", outcome.task_a.converged},
          {"converged_b", outcome.task_b.converged},
          {"best_fitness_a", outcome.task_a.best_fitness},
          {"best_fitness_b", outcome.task_b.best_fitness},
          {"best_genotype_a", genotype_json(outcome.task_a.best)},
          {"best_genotype_b", genotype_json(outcome.task_b.best)}}},
    };
    if (outcome.overlap_count) {
        j["outcome"]["overlap_count"] = *outcome.overlap_count;
    } else {
        j["outcome"]["overlap_count"] = nullptr;
    }
    return j;
}

std::string run_basename(const ExperimentPlan& plan) {
    return arm_name(plan.arm) + "-" + std::to_string(plan.seed) + "-" + plan.task_a.name +
           "-" + plan.task_b.name;
}

} // namespace pathnet
