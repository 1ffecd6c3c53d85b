#include "pathnet/async_evolution.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "pathnet/errors.hpp"

namespace pathnet {

SharedFitnessArray::SharedFitnessArray(int slots)
    : size_(slots), slots_(new std::atomic<double>[slots]) {
    for (int i = 0; i < slots; ++i) {
        slots_[i].store(kFitnessSentinel, std::memory_order_relaxed);
    }
}

double SharedFitnessArray::load(int slot) const {
    return slots_[slot].load(std::memory_order_acquire);
}

void SharedFitnessArray::store(int slot, double value, int writer_id) {
    if (auditor_) {
        std::lock_guard<std::mutex> lock(auditor_mutex_);
        auditor_(slot, writer_id);
    }
    slots_[slot].store(value, std::memory_order_release);
}

void SharedFitnessArray::set_write_auditor(std::function<void(int, int)> auditor) {
    auditor_ = std::move(auditor);
}

SharedPopulation::SharedPopulation(std::vector<PathGenotype> genotypes) {
    slots_.reserve(genotypes.size());
    for (PathGenotype& g : genotypes) {
        auto slot = std::make_unique<Slot>();
        slot->genotype = std::move(g);
        slots_.push_back(std::move(slot));
    }
}

PathGenotype SharedPopulation::read_copy(int slot) const {
    std::lock_guard<std::mutex> lock(slots_[slot]->mutex);
    return slots_[slot]->genotype;
}

void SharedPopulation::write(int slot, PathGenotype g) {
    std::lock_guard<std::mutex> lock(slots_[slot]->mutex);
    slots_[slot]->genotype = std::move(g);
}

namespace {

struct SharedRunState {
    std::atomic<bool> stop{false};
    std::atomic<long> logical_clock{0};
    std::mutex stop_check_mutex;
};

void worker_loop(int id, SharedPopulation& pop, SharedFitnessArray& fitness,
                 const std::function<double(const PathGenotype&)>& evaluate_round,
                 const EvolutionParams& evo, const NetConfig& cfg,
                 const PathGenotype* reuse_path, const AsyncParams& params,
                 std::uint64_t seed, SharedRunState& state,
                 const std::function<bool(const GenerationRecord&)>& stop_when,
                 std::vector<GenerationRecord>& records) {
    RngStream rng = RngStream(seed, 0x776f726bULL).split(static_cast<std::uint64_t>(id));
    PathGenotype genotype = pop.read_copy(id);
    const int peers = pop.size() - 1;
    const int sample_count = std::min(params.tournament_size, peers);

    long rounds_used = 0;
    long generation = 0;
    while (rounds_used < params.round_budget && !state.stop.load(std::memory_order_relaxed)) {
        // (2) evaluate for T_w training rounds (racy grid updates permitted)
        double acc_sum = 0.0;
        int rounds = 0;
        while (rounds < params.rounds_per_eval && rounds_used < params.round_budget) {
            acc_sum += evaluate_round(genotype);
            ++rounds;
            ++rounds_used;
        }
        const double own_fitness = acc_sum / static_cast<double>(rounds);
        // (3) publish
        fitness.store(id, own_fitness, id);

        GenerationRecord rec;
        rec.generation = generation++;
        rec.worker_id = id;
        rec.slot_a = id;
        rec.fit_a = own_fitness;
        rec.logical_time = state.logical_clock.fetch_add(1, std::memory_order_relaxed);

        // (4) sample B distinct other slots uniformly, without replacement
        int best_slot = -1;
        double best_fit = 0.0;
        if (sample_count > 0) {
            std::vector<int> others;
            others.reserve(peers);
            for (int j = 0; j < pop.size(); ++j) {
                if (j != id) others.push_back(j);
            }
            for (int k = 0; k < sample_count; ++k) {
                const int pick = k + static_cast<int>(rng.uniform_int(
                                         0, static_cast<std::int64_t>(others.size()) - k));
                std::swap(others[k], others[pick]);
                const int j = others[k];
                const double f = fitness.load(j);
                if (f == kFitnessSentinel) continue; // under evaluation, cannot win
                if (best_slot == -1 || f > best_fit) {
                    best_slot = j;
                    best_fit = f;
                }
            }
        }
        rec.slot_b = best_slot;
        rec.fit_b = best_slot >= 0 ? best_fit : kFitnessSentinel;

        if (best_slot >= 0 && best_fit >= own_fitness) {
            // (5) adopt the winner: copy, mutate, reset own fitness
            const PathGenotype source = pop.read_copy(best_slot);
            rec.winner = best_slot;
            rec.winner_genotype = source;
            rec.copied_from = best_slot;
            genotype = mutate(source, evo, cfg, reuse_path, rng);
            pop.write(id, genotype);
            fitness.store(id, kFitnessSentinel, id);
        } else {
            // (6) retain genotype and published fitness
            rec.winner = id;
            rec.winner_genotype = genotype;
        }
        if (params.frozen_overlap_fn) {
            rec.frozen_overlap_count = params.frozen_overlap_fn(rec.winner_genotype);
        }

        if (stop_when) {
            std::lock_guard<std::mutex> lock(state.stop_check_mutex);
            if (stop_when(rec)) state.stop.store(true, std::memory_order_relaxed);
        }
        records.push_back(std::move(rec));
    }
}

} // namespace

AsyncResult run_async(SharedPopulation& pop, SharedFitnessArray& fitness,
                      const WorkerEvaluatorFactory& make_evaluator,
                      const EvolutionParams& evo, const NetConfig& cfg,
                      const PathGenotype* reuse_path, const AsyncParams& params,
                      std::uint64_t seed,
                      const std::function<bool(const GenerationRecord&)>& stop_when) {
    if (pop.size() != fitness.size()) {
        throw InputError("population and fitness array sizes differ");
    }
    const int workers = pop.size();
    SharedRunState state;
    std::vector<std::vector<GenerationRecord>> per_worker(workers);
    std::vector<std::exception_ptr> errors(workers);

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int id = 0; id < workers; ++id) {
        threads.emplace_back([&, id] {
            try {
                const auto evaluate_round = make_evaluator(id);
                worker_loop(id, pop, fitness, evaluate_round, evo, cfg, reuse_path, params,
                            seed, state, stop_when, per_worker[id]);
            } catch (...) {
                errors[id] = std::current_exception();
                state.stop.store(true, std::memory_order_relaxed);
            }
        });
    }
    for (std::thread& t : threads) t.join();
    for (int id = 0; id < workers; ++id) {
        if (errors[id]) std::rethrow_exception(errors[id]); // no silent partial results
    }

    AsyncResult result;
    for (auto& recs : per_worker) {
        result.records.insert(result.records.end(), std::make_move_iterator(recs.begin()),
                              std::make_move_iterator(recs.end()));
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const GenerationRecord& a, const GenerationRecord& b) {
                  return a.logical_time < b.logical_time;
              });
    result.final_population.reserve(workers);
    result.final_fitness.reserve(workers);
    for (int id = 0; id < workers; ++id) {
        result.final_population.push_back(pop.read_copy(id));
        result.final_fitness.push_back(fitness.load(id));
    }
    return result;
}

} // namespace pathnet
