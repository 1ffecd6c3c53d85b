#include "pathnet/net.hpp"

#include <algorithm>
#include <string>

#include "pathnet/errors.hpp"

namespace pathnet {

NetConfig NetConfig::mnist_default() {
    return NetConfig{};
}

NetConfig NetConfig::large() {
    NetConfig cfg;
    cfg.modules_per_layer = 20;
    cfg.max_path_width = 5;
    return cfg;
}

void NetConfig::validate() const {
    if (layers < 1) throw InputError("NetConfig: layers must be >= 1");
    if (modules_per_layer < 1) throw InputError("NetConfig: modules_per_layer must be >= 1");
    if (neurons_per_module < 1) throw InputError("NetConfig: neurons_per_module must be >= 1");
    if (max_path_width < 1 || max_path_width > modules_per_layer) {
        throw InputError("NetConfig: need 1 <= max_path_width <= modules_per_layer");
    }
    if (input_dim < 1) throw InputError("NetConfig: input_dim must be >= 1");
}

PathGenotype PathGenotype::random(const NetConfig& cfg, RngStream& rng) {
    PathGenotype g(cfg.max_path_width, cfg.layers);
    for (int& e : g.entries_) {
        e = static_cast<int>(rng.uniform_int(0, cfg.modules_per_layer));
    }
    return g;
}

std::vector<int> PathGenotype::active_set(int layer) const {
    std::vector<int> set;
    set.reserve(width_);
    for (int i = 0; i < width_; ++i) {
        set.push_back(entry(i, layer));
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    return set;
}

ParameterGrid::ParameterGrid(NetConfig cfg, RngStream& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    modules_.resize(static_cast<std::size_t>(cfg_.layers) * cfg_.modules_per_layer);
    frozen_.assign(modules_.size(), 0);
    frozen_sets_.resize(cfg_.layers);
    for (int l = 0; l < cfg_.layers; ++l) {
        for (int m = 0; m < cfg_.modules_per_layer; ++m) {
            init_module(l, m, rng);
        }
    }
}

void ParameterGrid::init_module(int layer, int m, RngStream& rng) {
    const int in = layer == 0 ? cfg_.input_dim : cfg_.neurons_per_module;
    const int out = cfg_.neurons_per_module;
    ModuleParams& p = modules_[slot(layer, m)];
    p.W = Matrix(out, in);
    glorot_fill(p.W, in, out, rng);
    p.b.assign(out, 0.0);
}

int ParameterGrid::frozen_count() const {
    return static_cast<int>(std::count(frozen_.begin(), frozen_.end(), 1));
}

void ParameterGrid::add_head(int task, int classes, RngStream& rng) {
    if (classes < 2) throw InputError("add_head: need >= 2 classes");
    ModuleParams head;
    head.W = Matrix(classes, cfg_.neurons_per_module);
    glorot_fill(head.W, cfg_.neurons_per_module, classes, rng);
    head.b.assign(classes, 0.0);
    heads_[task] = std::move(head);
}

ModuleParams& ParameterGrid::head(int task) {
    auto it = heads_.find(task);
    if (it == heads_.end()) throw StateError("no head for task " + std::to_string(task));
    return it->second;
}

const ModuleParams& ParameterGrid::head(int task) const {
    auto it = heads_.find(task);
    if (it == heads_.end()) throw StateError("no head for task " + std::to_string(task));
    return it->second;
}

std::vector<int> ParameterGrid::effective_active(const PathGenotype& g, int layer) const {
    std::vector<int> set = g.active_set(layer);
    if (cfg_.always_include_frozen && !frozen_sets_[layer].empty()) {
        std::vector<int> merged;
        std::set_union(set.begin(), set.end(), frozen_sets_[layer].begin(),
                       frozen_sets_[layer].end(), std::back_inserter(merged));
        set = std::move(merged);
    }
    return set;
}

Matrix ParameterGrid::forward(const PathGenotype& g, int task, const Matrix& x,
                              PathActivation* act) const {
    if (g.layers() != cfg_.layers) {
        throw DimensionError("forward: genotype has " + std::to_string(g.layers()) +
                             " layers, grid has " + std::to_string(cfg_.layers));
    }
    if (static_cast<int>(x.cols()) != cfg_.input_dim) {
        throw DimensionError("forward: input dim " + std::to_string(x.cols()) +
                             " != " + std::to_string(cfg_.input_dim));
    }
    const ModuleParams& h = head(task); // throws StateError if missing

    if (act) {
        act->layer_inputs.clear();
        act->preacts.assign(cfg_.layers, {});
        act->active.assign(cfg_.layers, {});
    }

    Matrix cur = x;
    for (int l = 0; l < cfg_.layers; ++l) {
        if (act) act->layer_inputs.push_back(cur);
        const std::vector<int> active = effective_active(g, l);
        Matrix summed(cur.rows(), cfg_.neurons_per_module);
        for (int m : active) {
            const ModuleParams& p = module(l, m);
            Matrix z = linear_forward(p.W, p.b, cur);
            Matrix a = relu(z);
            for (std::size_t i = 0; i < summed.size(); ++i) {
                summed.data()[i] += a.data()[i];
            }
            if (act) act->preacts[l].emplace_back(m, std::move(z));
        }
        if (act) act->active[l] = active;
        cur = std::move(summed);
    }
    if (act) act->head_input = cur;
    return linear_forward(h.W, h.b, cur);
}

void ParameterGrid::backward_and_step(const PathGenotype& g, int task,
                                      const PathActivation& act, const Matrix& dlogits,
                                      double lr) {
    (void)g;
    ModuleParams& h = head(task);
    const Matrix& hin = act.head_input;
    const std::size_t batch = hin.rows();
    const std::size_t classes = h.W.rows();
    const std::size_t hidden = h.W.cols();

    // head gradients: dW = dlogits^T * hin, db = colsum(dlogits)
    Matrix dWh(classes, hidden);
    std::vector<double> dbh(classes, 0.0);
    Matrix dcur(batch, hidden); // gradient flowing into the last summed output
    for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t c = 0; c < classes; ++c) {
            const double dl = dlogits(r, c);
            dbh[c] += dl;
            for (std::size_t k = 0; k < hidden; ++k) {
                dWh(c, k) += dl * hin(r, k);
                dcur(r, k) += dl * h.W(c, k);
            }
        }
    }

    struct PendingUpdate {
        ModuleParams* params;
        Matrix dW;
        std::vector<double> db;
    };
    std::vector<PendingUpdate> pending;

    for (int l = cfg_.layers - 1; l >= 0; --l) {
        const Matrix& lin = act.layer_inputs[l];
        Matrix dprev(lin.rows(), lin.cols());
        for (const auto& [m, z] : act.preacts[l]) {
            const ModuleParams& p = module(l, m);
            // dz = dcur gated by relu
            Matrix dW(p.W.rows(), p.W.cols());
            std::vector<double> db(p.b.size(), 0.0);
            for (std::size_t r = 0; r < z.rows(); ++r) {
                for (std::size_t o = 0; o < z.cols(); ++o) {
                    if (z(r, o) <= 0.0) continue;
                    const double dz = dcur(r, o);
                    db[o] += dz;
                    for (std::size_t c = 0; c < lin.cols(); ++c) {
                        dW(o, c) += dz * lin(r, c);
                        dprev(r, c) += dz * p.W(o, c);
                    }
                }
            }
            if (!is_frozen(l, m)) {
                pending.push_back({&module(l, m), std::move(dW), std::move(db)});
            }
        }
        dcur = std::move(dprev);
    }

    // gradients are computed against pre-update parameters, then applied
    sgd_step(h.W, dWh, lr);
    sgd_step(h.b, dbh, lr);
    for (PendingUpdate& u : pending) {
        sgd_step(u.params->W, u.dW, lr);
        sgd_step(u.params->b, u.db, lr);
    }
}

void ParameterGrid::freeze_path(const PathGenotype& g) {
    for (int l = 0; l < cfg_.layers; ++l) {
        std::vector<int> set = g.active_set(l);
        for (int m : set) frozen_[slot(l, m)] = 1;
        std::vector<int> merged;
        std::set_union(frozen_sets_[l].begin(), frozen_sets_[l].end(), set.begin(), set.end(),
                       std::back_inserter(merged));
        frozen_sets_[l] = std::move(merged);
    }
    frozen_path_ = g;
}

void ParameterGrid::reinit_unfrozen(RngStream& rng) {
    for (int l = 0; l < cfg_.layers; ++l) {
        for (int m = 0; m < cfg_.modules_per_layer; ++m) {
            if (!frozen_[slot(l, m)]) init_module(l, m, rng);
        }
    }
}

} // namespace pathnet
