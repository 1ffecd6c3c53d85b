#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pathnet/async_evolution.hpp"
#include "pathnet/evolution.hpp"
#include "pathnet/net.hpp"
#include "pathnet/tasks.hpp"

#include "json.hpp"

namespace pathnet {

enum class Arm { Independent, Finetune, PathNet };
enum class Engine { Serial, Async };

std::string arm_name(Arm arm);
Arm arm_from_name(const std::string& name);
std::string engine_name(Engine engine);
Engine engine_from_name(const std::string& name);

struct ExperimentPlan {
    Arm arm = Arm::PathNet;
    Engine engine = Engine::Serial;
    TaskSpec task_a;
    TaskSpec task_b;
    NetConfig net;
    EvolutionParams evo;
    std::uint64_t seed = 1;
    int population = 64; // also the async worker count
    long budget = 500;   // max generations per task; guard against no convergence
    int async_tournament_size = 20; // B
    int async_rounds_per_eval = 10; // T_w
    /// When nonempty, grid checkpoints are written as
    /// {checkpoint_prefix}.post_task_a.grid / {checkpoint_prefix}.final.grid
    std::string checkpoint_prefix;
};

struct TaskRunResult {
    long generations = 0;
    bool converged = false;
    PathGenotype best;
    double best_fitness = 0.0;
    std::vector<PathGenotype> final_population;
    std::vector<GenerationRecord> records;
};

struct TransferOutcome {
    TaskRunResult task_a;
    TaskRunResult task_b;
    std::optional<int> overlap_count; // pathnet arm only
    long total() const { return task_a.generations + task_b.generations; }
    bool converged() const { return task_a.converged && task_b.converged; }
};

/// Count of distinct (layer, module) pairs of the frozen path present in
/// any genotype of the final task-B population.
int overlap_metric(const std::vector<PathGenotype>& final_pop, const PathGenotype& frozen_path);

/// control.total / pathnet.total; empty when either run did not converge.
std::optional<double> speedup_ratio(const TransferOutcome& control,
                                    const TransferOutcome& pathnet);

TransferOutcome run_pathnet_transfer(const ExperimentPlan& plan);
TransferOutcome run_control(const ExperimentPlan& plan);
/// Dispatch on plan.arm.
TransferOutcome run_experiment(const ExperimentPlan& plan);

nlohmann::json summary_json(const ExperimentPlan& plan, const TransferOutcome& outcome);
std::string run_basename(const ExperimentPlan& plan);

} // namespace pathnet
