#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pathnet/net.hpp"
#include "pathnet/tasks.hpp"

#include "json.hpp"

namespace pathnet {

struct EvolutionParams {
    /// Per-element mutation probability; negative means the default
    /// 1/(N*L) for the grid in use.
    double mutation_prob = -1.0;
    int mutation_range = 2;      // deltas drawn from +-[1, range], wrapped mod M
    int tournament_size = 2;     // B (serial); async default is 20
    int eval_batches = 50;       // T mini-batches per evaluation
    int batch_size = 16;
    double lr = 1e-4;
    double reuse_prob = 0.2;     // task-B bias toward the frozen path
    double duplication_rate = 0.0;
    int utility_window = 20;     // W_u

    double mutation_prob_or_default(const NetConfig& cfg) const;
    void validate() const;
};

struct Population {
    std::vector<PathGenotype> slots;
    std::vector<std::optional<double>> fitness; // nullopt = not yet evaluated

    static Population random(int count, const NetConfig& cfg, RngStream& rng);
    int size() const { return static_cast<int>(slots.size()); }
};

/// One serialized line of the per-generation JSONL stream. Worker fields are
/// populated by the async engine only.
struct GenerationRecord {
    long generation = 0;
    int slot_a = -1;
    int slot_b = -1;
    double fit_a = 0.0;
    double fit_b = 0.0;
    int winner = -1;
    PathGenotype winner_genotype;
    int frozen_overlap_count = 0;
    // async extras
    int worker_id = -1;
    long logical_time = -1;
    std::optional<int> copied_from;

    nlohmann::json to_json() const;
};

/// Per-module sliding mean of the fitnesses of evaluated paths containing
/// that module. Modules never seen report no value.
class ModuleUtility {
public:
    ModuleUtility(int layers, int modules_per_layer, int window);

    void update(const PathGenotype& g, double fitness);
    std::optional<double> mean(int layer, int module) const;
    int window() const { return window_; }

private:
    int layers_;
    int modules_;
    int window_;
    std::vector<std::deque<double>> history_;
};

/// Trains the path for eval_batches mini-batches drawn from `stream` and
/// returns the fraction of those training examples classified correctly.
/// Grid parameters along the path are updated as a side effect.
double evaluate_path(ParameterGrid& grid, const PathGenotype& g, int task,
                     SampleStream& stream, const EvolutionParams& params);

/// Point mutation: each element independently with probability
/// mutation_prob; a mutated element is either biased toward `reuse_path`
/// (probability reuse_prob, when provided) or shifted by a uniform nonzero
/// delta in [-range, range], wrapped modulo M.
PathGenotype mutate(const PathGenotype& g, const EvolutionParams& params, const NetConfig& cfg,
                    const PathGenotype* reuse_path, RngStream& rng);

/// Fitness source for a tournament; slot index plus the genotype occupying
/// it. The serial engine wires evaluate_path here; tests may stub it.
using SlotEvaluator = std::function<double(int slot, const PathGenotype& g)>;

/// One serial binary tournament: two distinct slots evaluated, loser
/// overwritten by a mutated copy of the winner (ties broken at random).
GenerationRecord tournament_step(Population& pop, const SlotEvaluator& evaluate,
                                 const EvolutionParams& params, const NetConfig& cfg,
                                 const PathGenotype* reuse_path, RngStream& rng);

/// Net2Net-style copy inside one layer: source sampled with probability
/// proportional to (utility - layer min + eps), destination uniform among
/// non-frozen strictly-lower-utility modules. No-op when nothing is
/// eligible. Frozen modules are never overwritten.
void duplicate_module(ParameterGrid& grid, const ModuleUtility& util, int layer,
                      RngStream& rng, double eps = 1e-6);

/// Count of g's active (layer, module) pairs that are frozen in the grid.
int frozen_overlap(const ParameterGrid& grid, const PathGenotype& g);

} // namespace pathnet
