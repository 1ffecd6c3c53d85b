#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "pathnet/matrix.hpp"
#include "pathnet/rng.hpp"

namespace pathnet {

/// Shape of the module grid. Presets: mnist_default() is the 3x10 grid of
/// 20-neuron linear modules with paths up to 3 modules wide; large() is the
/// 3x20 grid with paths up to 5 wide.
struct NetConfig {
    int layers = 3;
    int modules_per_layer = 10; // M
    int neurons_per_module = 20;
    int max_path_width = 3; // N
    int input_dim = 784;
    /// When set, modules of previously frozen paths are unioned into every
    /// layer's active set on forward (they still receive no updates).
    bool always_include_frozen = false;

    static NetConfig mnist_default();
    static NetConfig large();
    void validate() const;
    bool operator==(const NetConfig&) const = default;
};

/// An N x L integer matrix naming the modules a pathway may use per layer.
/// Duplicate entries within a layer activate the module once.
class PathGenotype {
public:
    PathGenotype() = default;
    PathGenotype(int width, int layers, int fill = 0)
        : width_(width), layers_(layers),
          entries_(static_cast<std::size_t>(width) * layers, fill) {}

    static PathGenotype random(const NetConfig& cfg, RngStream& rng);

    int width() const { return width_; }
    int layers() const { return layers_; }

    int& entry(int i, int layer) { return entries_[idx(i, layer)]; }
    int entry(int i, int layer) const { return entries_[idx(i, layer)]; }

    const std::vector<int>& entries() const { return entries_; }

    /// Deduplicated, sorted module indices this genotype activates in
    /// `layer`. Size is at most width().
    std::vector<int> active_set(int layer) const;

    bool operator==(const PathGenotype&) const = default;

private:
    std::size_t idx(int i, int layer) const {
        return static_cast<std::size_t>(i) * layers_ + layer;
    }

    int width_ = 0;
    int layers_ = 0;
    std::vector<int> entries_;
};

struct ModuleParams {
    Matrix W;
    std::vector<double> b;
    bool operator==(const ModuleParams&) const = default;
};

/// Caches from a forward pass needed by the matching backward pass. Valid
/// only for the genotype/input that produced it.
struct PathActivation {
    std::vector<Matrix> layer_inputs; // [0]=network input, [l]=input to layer l
    // per layer: (module index, pre-activation z) for every module that ran
    std::vector<std::vector<std::pair<int, Matrix>>> preacts;
    std::vector<std::vector<int>> active; // effective active set per layer
    Matrix head_input;                    // summed output of the last layer
};

/// The super-network: L x M grid of linear+ReLU modules, per-task linear
/// readout heads, and the frozen mask that protects transferred paths.
class ParameterGrid {
public:
    ParameterGrid(NetConfig cfg, RngStream& rng);

    const NetConfig& config() const { return cfg_; }

    ModuleParams& module(int layer, int m) { return modules_[slot(layer, m)]; }
    const ModuleParams& module(int layer, int m) const { return modules_[slot(layer, m)]; }

    bool is_frozen(int layer, int m) const { return frozen_[slot(layer, m)]; }
    int frozen_count() const;

    void add_head(int task, int classes, RngStream& rng);
    bool has_head(int task) const { return heads_.count(task) != 0; }
    ModuleParams& head(int task);
    const ModuleParams& head(int task) const;
    const std::map<int, ModuleParams>& heads() const { return heads_; }

    /// Active set of `g` at `layer`, unioned with the frozen-path modules
    /// when the always_include_frozen option is on.
    std::vector<int> effective_active(const PathGenotype& g, int layer) const;

    /// Path-gated forward. Only modules in the effective active sets run.
    Matrix forward(const PathGenotype& g, int task, const Matrix& x,
                   PathActivation* act = nullptr) const;

    /// Backprop through the cached activation and apply SGD to the task head
    /// and every active non-frozen module. Frozen active modules propagate
    /// gradient but receive no update. Caller must pair this with the
    /// forward that produced `act`.
    void backward_and_step(const PathGenotype& g, int task, const PathActivation& act,
                           const Matrix& dlogits, double lr);

    /// Mark every module in g's active sets frozen. Idempotent, cumulative
    /// across tasks. Also records g as the latest optimal path (for reuse
    /// mutation and the always-active option).
    void freeze_path(const PathGenotype& g);

    /// Redraw all non-frozen module parameters; frozen modules and existing
    /// heads are untouched.
    void reinit_unfrozen(RngStream& rng);

    const std::optional<PathGenotype>& frozen_path() const { return frozen_path_; }

    /// (layer, module) pairs frozen so far, i.e. union of all frozen paths.
    const std::vector<std::vector<int>>& frozen_active_sets() const { return frozen_sets_; }

    bool operator==(const ParameterGrid&) const = default;

private:
    friend class Checkpoint;
    ParameterGrid() = default; // for checkpoint loading

    std::size_t slot(int layer, int m) const {
        return static_cast<std::size_t>(layer) * cfg_.modules_per_layer + m;
    }
    void init_module(int layer, int m, RngStream& rng);

    NetConfig cfg_;
    std::vector<ModuleParams> modules_; // layer-major
    std::vector<char> frozen_;
    std::vector<std::vector<int>> frozen_sets_; // per layer, sorted
    std::optional<PathGenotype> frozen_path_;
    std::map<int, ModuleParams> heads_;
};

} // namespace pathnet
