#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pathnet/checkpoint.hpp"
#include "pathnet/errors.hpp"
#include "pathnet/evolution.hpp"
#include "pathnet/experiment.hpp"
#include "pathnet/run_config.hpp"

namespace py = pybind11;
using namespace pathnet;

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw InputError("input batch is empty");
    Matrix x(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw InputError("ragged input batch");
        for (std::size_t c = 0; c < rows[r].size(); ++c) x(r, c) = rows[r][c];
    }
    return x;
}

std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
    std::vector<std::vector<double>> rows(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double* begin = m.data().data() + r * m.cols();
        rows[r].assign(begin, begin + m.cols());
    }
    return rows;
}

std::vector<std::vector<int>> genotype_rows(const PathGenotype& g) {
    std::vector<std::vector<int>> rows(g.width());
    for (int i = 0; i < g.width(); ++i) {
        for (int l = 0; l < g.layers(); ++l) rows[i].push_back(g.entry(i, l));
    }
    return rows;
}

PathGenotype genotype_from_rows(const std::vector<std::vector<int>>& rows) {
    if (rows.empty() || rows[0].empty()) throw InputError("genotype must be non-empty");
    PathGenotype g(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw InputError("ragged genotype");
        for (std::size_t l = 0; l < rows[i].size(); ++l) {
            g.entry(static_cast<int>(i), static_cast<int>(l)) = rows[i][l];
        }
    }
    return g;
}

} // namespace

PYBIND11_MODULE(_pathnet, m) {
    m.doc() = "modular super-network with evolutionary pathway selection";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_IOError);

    py::class_<NetConfig>(m, "NetConfig")
        .def(py::init<>())
        .def_readwrite("layers", &NetConfig::layers)
        .def_readwrite("modules_per_layer", &NetConfig::modules_per_layer)
        .def_readwrite("neurons_per_module", &NetConfig::neurons_per_module)
        .def_readwrite("max_path_width", &NetConfig::max_path_width)
        .def_readwrite("input_dim", &NetConfig::input_dim)
        .def_readwrite("always_include_frozen", &NetConfig::always_include_frozen)
        .def_static("mnist_default", &NetConfig::mnist_default)
        .def_static("large", &NetConfig::large)
        .def("validate", &NetConfig::validate)
        .def("__eq__", [](const NetConfig& a, const NetConfig& b) { return a == b; });

    py::class_<RngStream>(m, "RngStream")
        .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream") = 0)
        .def("split", &RngStream::split)
        .def("uniform", py::overload_cast<>(&RngStream::uniform))
        .def("uniform_int", &RngStream::uniform_int)
        .def("bernoulli", &RngStream::bernoulli);

    py::class_<PathGenotype>(m, "PathGenotype")
        .def(py::init(&genotype_from_rows), py::arg("rows"))
        .def_static("random",
                    [](const NetConfig& cfg, RngStream& rng) {
                        return PathGenotype::random(cfg, rng);
                    })
        .def_property_readonly("width", &PathGenotype::width)
        .def_property_readonly("layers", &PathGenotype::layers)
        .def("active_set", &PathGenotype::active_set, py::arg("layer"))
        .def("rows", &genotype_rows)
        .def("__eq__", [](const PathGenotype& a, const PathGenotype& b) { return a == b; });

    py::class_<EvolutionParams>(m, "EvolutionParams")
        .def(py::init<>())
        .def_readwrite("mutation_prob", &EvolutionParams::mutation_prob)
        .def_readwrite("mutation_range", &EvolutionParams::mutation_range)
        .def_readwrite("eval_batches", &EvolutionParams::eval_batches)
        .def_readwrite("batch_size", &EvolutionParams::batch_size)
        .def_readwrite("lr", &EvolutionParams::lr)
        .def_readwrite("reuse_prob", &EvolutionParams::reuse_prob)
        .def_readwrite("duplication_rate", &EvolutionParams::duplication_rate)
        .def_readwrite("utility_window", &EvolutionParams::utility_window)
        .def("validate", &EvolutionParams::validate);

    py::class_<ParameterGrid>(m, "ParameterGrid")
        .def(py::init([](const NetConfig& cfg, RngStream& rng) {
                 return ParameterGrid(cfg, rng);
             }),
             py::arg("config"), py::arg("rng"))
        .def_property_readonly("config", &ParameterGrid::config)
        .def("add_head",
             [](ParameterGrid& grid, int task, int classes, RngStream& rng) {
                 grid.add_head(task, classes, rng);
             })
        .def("has_head", &ParameterGrid::has_head)
        .def("is_frozen", &ParameterGrid::is_frozen)
        .def("frozen_count", &ParameterGrid::frozen_count)
        .def("freeze_path", &ParameterGrid::freeze_path)
        .def("reinit_unfrozen",
             [](ParameterGrid& grid, RngStream& rng) { grid.reinit_unfrozen(rng); })
        .def("forward",
             [](const ParameterGrid& grid, const PathGenotype& g, int task,
                const std::vector<std::vector<double>>& x) {
                 return matrix_to_rows(grid.forward(g, task, matrix_from_rows(x)));
             })
        .def("train_step",
             [](ParameterGrid& grid, const PathGenotype& g, int task,
                const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                double lr) {
                 PathActivation act;
                 const Matrix logits = grid.forward(g, task, matrix_from_rows(x), &act);
                 const XentResult xr = softmax_xent(logits, labels);
                 grid.backward_and_step(g, task, act, xr.dlogits, lr);
                 return xr.loss;
             },
             py::arg("genotype"), py::arg("task"), py::arg("x"), py::arg("labels"),
             py::arg("lr"))
        .def("save", [](const ParameterGrid& grid, const std::string& path) {
            Checkpoint::save(grid, path);
        })
        .def_static("load",
                    [](const std::string& path) { return Checkpoint::load(path); });

    m.def("mutate",
          [](const PathGenotype& g, const EvolutionParams& params, const NetConfig& cfg,
             RngStream& rng) { return mutate(g, params, cfg, nullptr, rng); },
          py::arg("genotype"), py::arg("params"), py::arg("config"), py::arg("rng"));

    m.def("run_from_json",
          [](const std::string& config) {
              const RunConfig cfg = RunConfig::from_json(nlohmann::json::parse(config));
              nlohmann::json out = nlohmann::json::array();
              for (nlohmann::json& summary : execute_run(cfg)) {
                  out.push_back(std::move(summary));
              }
              return out.dump();
          },
          py::arg("config_json"),
          "Run the configured experiment; returns the replica summaries as a JSON string.");

    m.def("stats_from_dir",
          [](const std::string& summary_dir) { return aggregate_stats(summary_dir).dump(); },
          py::arg("summary_dir"));
}
