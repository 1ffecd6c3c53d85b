#include "pathnet/evolution.hpp"

#include <algorithm>
#include <cassert>

#include "pathnet/errors.hpp"

namespace pathnet {

double EvolutionParams::mutation_prob_or_default(const NetConfig& cfg) const {
    if (mutation_prob >= 0.0) return mutation_prob;
    return 1.0 / (static_cast<double>(cfg.max_path_width) * cfg.layers);
}

void EvolutionParams::validate() const {
    if (mutation_prob > 1.0) throw InputError("mutation_prob must be <= 1");
    if (mutation_range < 1) throw InputError("mutation_range must be >= 1");
    if (tournament_size < 1) throw InputError("tournament_size must be >= 1");
    if (eval_batches < 1) throw InputError("eval_batches must be >= 1");
    if (batch_size < 1) throw InputError("batch_size must be >= 1");
    if (reuse_prob < 0.0 || reuse_prob > 1.0) throw InputError("reuse_prob must be in [0,1]");
    if (duplication_rate < 0.0 || duplication_rate > 1.0) {
        throw InputError("duplication_rate must be in [0,1]");
    }
    if (utility_window < 1) throw InputError("utility_window must be >= 1");
}

Population Population::random(int count, const NetConfig& cfg, RngStream& rng) {
    Population pop;
    pop.slots.reserve(count);
    for (int i = 0; i < count; ++i) {
        pop.slots.push_back(PathGenotype::random(cfg, rng));
    }
    pop.fitness.assign(count, std::nullopt);
    return pop;
}

nlohmann::json GenerationRecord::to_json() const {
    nlohmann::json genotype = nlohmann::json::array();
    for (int i = 0; i < winner_genotype.width(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int l = 0; l < winner_genotype.layers(); ++l) {
            row.push_back(winner_genotype.entry(i, l));
        }
        genotype.push_back(std::move(row));
    }
    nlohmann::json j{
        {"generation", generation},
        {"slot_a", slot_a},
        {"slot_b", slot_b},
        {"fit_a", fit_a},
        {"fit_b", fit_b},
        {"winner", winner},
        {"genotype_winner", std::move(genotype)},
        {"frozen_overlap_count", frozen_overlap_count},
    };
    if (worker_id >= 0) {
        j["worker_id"] = worker_id;
        j["logical_time"] = logical_time;
        if (copied_from) {
            j["copied_from"] = *copied_from;
        } else {
            j["copied_from"] = nullptr;
        }
    }
    return j;
}

ModuleUtility::ModuleUtility(int layers, int modules_per_layer, int window)
    : layers_(layers), modules_(modules_per_layer), window_(window),
      history_(static_cast<std::size_t>(layers) * modules_per_layer) {
    if (window < 1) throw InputError("utility window must be >= 1");
}

void ModuleUtility::update(const PathGenotype& g, double fitness) {
    for (int l = 0; l < std::min(layers_, g.layers()); ++l) {
        for (int m : g.active_set(l)) {
            auto& h = history_[static_cast<std::size_t>(l) * modules_ + m];
            h.push_back(fitness);
            while (static_cast<int>(h.size()) > window_) h.pop_front();
        }
    }
}

std::optional<double> ModuleUtility::mean(int layer, int module) const {
    const auto& h = history_[static_cast<std::size_t>(layer) * modules_ + module];
    if (h.empty()) return std::nullopt;
    double sum = 0.0;
    for (double f : h) sum += f;
    return sum / static_cast<double>(h.size());
}

double evaluate_path(ParameterGrid& grid, const PathGenotype& g, int task,
                     SampleStream& stream, const EvolutionParams& params) {
    long correct = 0;
    long total = 0;
    for (int t = 0; t < params.eval_batches; ++t) {
        const Batch batch = stream.next(params.batch_size);
        PathActivation act;
        const Matrix logits = grid.forward(g, task, batch.x, &act);
        for (std::size_t r = 0; r < logits.rows(); ++r) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < logits.cols(); ++c) {
                if (logits(r, c) > logits(r, best)) best = c;
            }
            if (static_cast<int>(best) == batch.labels[r]) ++correct;
            ++total;
        }
        const XentResult xent = softmax_xent(logits, batch.labels);
        grid.backward_and_step(g, task, act, xent.dlogits, params.lr);
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

PathGenotype mutate(const PathGenotype& g, const EvolutionParams& params, const NetConfig& cfg,
                    const PathGenotype* reuse_path, RngStream& rng) {
    const double prob = params.mutation_prob_or_default(cfg);
    const int modules = cfg.modules_per_layer;
    PathGenotype out = g;
    for (int i = 0; i < out.width(); ++i) {
        for (int l = 0; l < out.layers(); ++l) {
            if (!rng.bernoulli(prob)) continue;
            if (reuse_path && rng.bernoulli(params.reuse_prob)) {
                const int pick = static_cast<int>(rng.uniform_int(0, reuse_path->width()));
                out.entry(i, l) = reuse_path->entry(pick, l);
                continue;
            }
            // nonzero delta in [-range, range], ring-wrapped
            std::int64_t delta = rng.uniform_int(1, 2L * params.mutation_range + 1);
            if (delta > params.mutation_range) delta = params.mutation_range - delta;
            int v = static_cast<int>((out.entry(i, l) + delta) % modules);
            if (v < 0) v += modules;
            out.entry(i, l) = v;
        }
    }
    return out;
}

GenerationRecord tournament_step(Population& pop, const SlotEvaluator& evaluate,
                                 const EvolutionParams& params, const NetConfig& cfg,
                                 const PathGenotype* reuse_path, RngStream& rng) {
    if (pop.size() < 2) throw InputError("tournament needs a population of >= 2");

    GenerationRecord rec;
    rec.slot_a = static_cast<int>(rng.uniform_int(0, pop.size()));
    rec.slot_b = static_cast<int>(rng.uniform_int(0, pop.size() - 1));
    if (rec.slot_b >= rec.slot_a) ++rec.slot_b;

    rec.fit_a = evaluate(rec.slot_a, pop.slots[rec.slot_a]);
    rec.fit_b = evaluate(rec.slot_b, pop.slots[rec.slot_b]);
    pop.fitness[rec.slot_a] = rec.fit_a;
    pop.fitness[rec.slot_b] = rec.fit_b;

    bool a_wins;
    if (rec.fit_a != rec.fit_b) {
        a_wins = rec.fit_a > rec.fit_b;
    } else {
        a_wins = rng.bernoulli(0.5);
    }
    const int winner = a_wins ? rec.slot_a : rec.slot_b;
    const int loser = a_wins ? rec.slot_b : rec.slot_a;
    rec.winner = winner;
    rec.winner_genotype = pop.slots[winner];

    pop.slots[loser] = mutate(pop.slots[winner], params, cfg, reuse_path, rng);
    pop.fitness[loser] = std::nullopt;
    return rec;
}

void duplicate_module(ParameterGrid& grid, const ModuleUtility& util, int layer,
                      RngStream& rng, double eps) {
    const int modules = grid.config().modules_per_layer;
    if (modules < 2) return;

    std::vector<double> utility(modules);
    double layer_min = 0.0;
    bool any = false;
    for (int m = 0; m < modules; ++m) {
        const auto u = util.mean(layer, m);
        utility[m] = u.value_or(0.0);
        if (u) {
            layer_min = any ? std::min(layer_min, *u) : *u;
            any = true;
        }
    }
    if (!any) return;
    // modules without data default to the layer minimum
    for (int m = 0; m < modules; ++m) {
        if (!util.mean(layer, m)) utility[m] = layer_min;
    }

    std::vector<double> weight(modules);
    double total = 0.0;
    for (int m = 0; m < modules; ++m) {
        weight[m] = utility[m] - layer_min + eps;
        total += weight[m];
    }
    int source = modules - 1;
    double pick = rng.uniform(0.0, total);
    for (int m = 0; m < modules; ++m) {
        pick -= weight[m];
        if (pick < 0.0) {
            source = m;
            break;
        }
    }

    std::vector<int> candidates;
    for (int m = 0; m < modules; ++m) {
        if (m != source && !grid.is_frozen(layer, m) && utility[m] < utility[source]) {
            candidates.push_back(m);
        }
    }
    if (candidates.empty()) return;
    const int dest =
        candidates[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(candidates.size())))];
    grid.module(layer, dest) = grid.module(layer, source);
}

int frozen_overlap(const ParameterGrid& grid, const PathGenotype& g) {
    int count = 0;
    for (int l = 0; l < std::min(g.layers(), grid.config().layers); ++l) {
        for (int m : g.active_set(l)) {
            if (grid.is_frozen(l, m)) ++count;
        }
    }
    return count;
}

} // namespace pathnet
