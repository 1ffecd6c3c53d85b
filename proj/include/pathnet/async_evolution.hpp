#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "pathnet/evolution.hpp"
#include "pathnet/net.hpp"

namespace pathnet {

/// Published while a slot is under evaluation; below every real fitness.
inline constexpr double kFitnessSentinel = -1000.0;

/// P fitness slots with atomic reads/writes. Slot i is written only by
/// worker i; an optional auditor observes every write for tests.
class SharedFitnessArray {
public:
    explicit SharedFitnessArray(int slots);

    int size() const { return size_; }
    double load(int slot) const;
    void store(int slot, double value, int writer_id);

    void set_write_auditor(std::function<void(int slot, int writer_id)> auditor);

private:
    int size_;
    std::unique_ptr<std::atomic<double>[]> slots_;
    std::function<void(int, int)> auditor_;
    std::mutex auditor_mutex_;
};

/// P genotype slots with per-slot guards so a copy-out never observes a
/// half-written genotype.
class SharedPopulation {
public:
    explicit SharedPopulation(std::vector<PathGenotype> genotypes);

    int size() const { return static_cast<int>(slots_.size()); }
    PathGenotype read_copy(int slot) const;
    void write(int slot, PathGenotype g);

private:
    struct Slot {
        mutable std::mutex mutex;
        PathGenotype genotype;
    };
    std::vector<std::unique_ptr<Slot>> slots_;
};

struct AsyncParams {
    int tournament_size = 20; // B other slots sampled per tournament
    int rounds_per_eval = 10; // T_w training rounds per evaluation
    long round_budget = 1000; // training rounds per worker
    // fills frozen_overlap_count on records when set
    std::function<int(const PathGenotype&)> frozen_overlap_fn;
};

/// Builds the per-worker fitness evaluator; called once in each worker's
/// thread so the evaluator can own worker-local state (e.g. a sample
/// stream). The returned callable scores one genotype evaluation.
using WorkerEvaluatorFactory =
    std::function<std::function<double(const PathGenotype&)>(int worker_id)>;

struct AsyncResult {
    std::vector<PathGenotype> final_population;
    std::vector<double> final_fitness;
    std::vector<GenerationRecord> records; // merged, logical-time ordered
};

/// Distributed asynchronous tournament selection: P workers, one slot each,
/// sharing the fitness array and population. Stops when the round budget is
/// exhausted or `stop_when` fires; workers finish their round and exit.
AsyncResult run_async(SharedPopulation& pop, SharedFitnessArray& fitness,
                      const WorkerEvaluatorFactory& make_evaluator,
                      const EvolutionParams& evo, const NetConfig& cfg,
                      const PathGenotype* reuse_path, const AsyncParams& params,
                      std::uint64_t seed,
                      const std::function<bool(const GenerationRecord&)>& stop_when = {});

} // namespace pathnet
