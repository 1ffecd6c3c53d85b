#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "pathnet/checkpoint.hpp"
#include "pathnet/errors.hpp"
#include "pathnet/net.hpp"

using namespace pathnet;

namespace {

NetConfig tiny_config() {
    NetConfig cfg;
    cfg.layers = 3;
    cfg.modules_per_layer = 4;
    cfg.neurons_per_module = 5;
    cfg.max_path_width = 2;
    cfg.input_dim = 6;
    return cfg;
}

Matrix random_batch(int rows, int cols, RngStream& rng) {
    Matrix x(rows, cols);
    for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
    return x;
}

std::vector<double> flatten_grid(const ParameterGrid& grid) {
    std::vector<double> all;
    const NetConfig& cfg = grid.config();
    for (int l = 0; l < cfg.layers; ++l) {
        for (int m = 0; m < cfg.modules_per_layer; ++m) {
            const ModuleParams& p = grid.module(l, m);
            all.insert(all.end(), p.W.data().begin(), p.W.data().end());
            all.insert(all.end(), p.b.begin(), p.b.end());
        }
    }
    return all;
}

} // namespace

TEST_CASE("random genotype entries stay in range, M=1 degenerates to zeros") {
    NetConfig cfg = tiny_config();
    cfg.modules_per_layer = 1;
    cfg.max_path_width = 1;
    RngStream rng(1);
    const PathGenotype g = PathGenotype::random(cfg, rng);
    for (int e : g.entries()) CHECK(e == 0);

    NetConfig mnist = NetConfig::mnist_default();
    RngStream rng2(2);
    const PathGenotype g2 = PathGenotype::random(mnist, rng2);
    CHECK(g2.width() == 3);
    CHECK(g2.layers() == 3);
    for (int e : g2.entries()) {
        CHECK(e >= 0);
        CHECK(e < 10);
    }
}

TEST_CASE("random genotype entry distribution is uniform (chi-squared)") {
    const NetConfig cfg = NetConfig::mnist_default();
    RngStream rng(3);
    std::vector<long> counts(10, 0);
    long draws = 0;
    for (int i = 0; i < 100000 / 9; ++i) {
        const PathGenotype g = PathGenotype::random(cfg, rng);
        for (int e : g.entries()) {
            ++counts[static_cast<std::size_t>(e)];
            ++draws;
        }
    }
    const double expected = static_cast<double>(draws) / 10.0;
    double chi2 = 0.0;
    for (long c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 21.67); // df=9, alpha=0.01
}

TEST_CASE("active_set deduplicates") {
    PathGenotype g(3, 1);
    g.entry(0, 0) = 2;
    g.entry(1, 0) = 2;
    g.entry(2, 0) = 2;
    CHECK(g.active_set(0) == std::vector<int>{2});

    g.entry(0, 0) = 9;
    g.entry(1, 0) = 1;
    g.entry(2, 0) = 5;
    CHECK(g.active_set(0) == std::vector<int>{1, 5, 9});
}

TEST_CASE("forward with duplicate entries equals any permutation") {
    const NetConfig cfg = tiny_config();
    RngStream rng(4);
    ParameterGrid grid(cfg, rng);
    grid.add_head(0, 2, rng);
    const Matrix x = random_batch(3, cfg.input_dim, rng);

    PathGenotype a(2, 3), b(2, 3);
    for (int l = 0; l < 3; ++l) {
        a.entry(0, l) = 1;
        a.entry(1, l) = 3;
        b.entry(0, l) = 3; // same active sets, permuted order
        b.entry(1, l) = 1;
    }
    const Matrix ya = grid.forward(a, 0, x);
    const Matrix yb = grid.forward(b, 0, x);
    CHECK(ya.data() != std::vector<double>{});
    for (std::size_t i = 0; i < ya.size(); ++i) {
        CHECK(ya.data()[i] == yb.data()[i]); // bit-identical
    }
}

TEST_CASE("single active module per layer equals a plain MLP") {
    const NetConfig cfg = tiny_config();
    RngStream rng(5);
    ParameterGrid grid(cfg, rng);
    grid.add_head(0, 2, rng);
    PathGenotype g(2, 3);
    for (int l = 0; l < 3; ++l) {
        g.entry(0, l) = 2;
        g.entry(1, l) = 2; // duplicate: still one module
    }
    const Matrix x = random_batch(2, cfg.input_dim, rng);
    const Matrix got = grid.forward(g, 0, x);

    Matrix h = x;
    for (int l = 0; l < 3; ++l) {
        const ModuleParams& p = grid.module(l, 2);
        h = relu(linear_forward(p.W, p.b, h));
    }
    const ModuleParams& head = grid.head(0);
    const Matrix want = linear_forward(head.W, head.b, h);
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("two identical modules double the pre-head contribution") {
    const NetConfig cfg = tiny_config();
    RngStream rng(6);
    ParameterGrid grid(cfg, rng);
    grid.add_head(0, 2, rng);
    // make module 1 a copy of module 0 in every layer
    for (int l = 0; l < cfg.layers; ++l) grid.module(l, 1) = grid.module(l, 0);

    PathGenotype single(2, 3), pair(2, 3);
    for (int l = 0; l < 3; ++l) {
        single.entry(0, l) = 0;
        single.entry(1, l) = 0;
        pair.entry(0, l) = 0;
        pair.entry(1, l) = l == 0 ? 1 : 0; // only layer 0 doubled
    }
    const Matrix x = random_batch(2, cfg.input_dim, rng);
    PathActivation act_single, act_pair;
    grid.forward(single, 0, x, &act_single);
    grid.forward(pair, 0, x, &act_pair);
    // layer-0 output (input to layer 1) is doubled elementwise
    for (std::size_t i = 0; i < act_single.layer_inputs[1].size(); ++i) {
        CHECK(act_pair.layer_inputs[1].data()[i] ==
              doctest::Approx(2.0 * act_single.layer_inputs[1].data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("zero module contributes nothing") {
    const NetConfig cfg = tiny_config();
    RngStream rng(7);
    ParameterGrid grid(cfg, rng);
    grid.add_head(0, 2, rng);
    grid.module(1, 3).W = Matrix(cfg.neurons_per_module, cfg.neurons_per_module);
    grid.module(1, 3).b.assign(cfg.neurons_per_module, 0.0);

    PathGenotype g(2, 3), g_plus(2, 3);
    for (int l = 0; l < 3; ++l) {
        g.entry(0, l) = 0;
        g.entry(1, l) = 0;
        g_plus.entry(0, l) = 0;
        g_plus.entry(1, l) = l == 1 ? 3 : 0;
    }
    const Matrix x = random_batch(2, cfg.input_dim, rng);
    const Matrix a = grid.forward(g, 0, x);
    const Matrix b = grid.forward(g_plus, 0, x);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("forward requires a head and matching input dim") {
    const NetConfig cfg = tiny_config();
    RngStream rng(8);
    ParameterGrid grid(cfg, rng);
    PathGenotype g(2, 3);
    const Matrix x(1, cfg.input_dim);
    CHECK_THROWS_AS(grid.forward(g, 0, x), StateError);
    grid.add_head(0, 2, rng);
    CHECK_THROWS_AS(grid.forward(g, 0, Matrix(1, cfg.input_dim + 1)), DimensionError);
}

TEST_CASE("gating soundness: inactive modules cannot influence the output") {
    const NetConfig cfg = tiny_config();
    RngStream rng(9);
    ParameterGrid grid(cfg, rng);
    grid.add_head(0, 2, rng);
    RngStream grng(10);
    for (int trial = 0; trial < 25; ++trial) {
        const PathGenotype g = PathGenotype::random(cfg, grng);
        const Matrix x = random_batch(2, cfg.input_dim, grng);
        const Matrix before = grid.forward(g, 0, x);
        // perturb every inactive module
        for (int l = 0; l < cfg.layers; ++l) {
            const std::vector<int> active = g.active_set(l);
            for (int m = 0; m < cfg.modules_per_layer; ++m) {
                if (std::find(active.begin(), active.end(), m) != active.end()) continue;
                for (double& v : grid.module(l, m).W.data()) v = grng.uniform(-9, 9);
                for (double& v : grid.module(l, m).b) v = grng.uniform(-9, 9);
            }
        }
        const Matrix after = grid.forward(g, 0, x);
        CHECK(before.data() == after.data()); // bit-exact
    }
}

TEST_CASE("backward gradients match finite differences along the path") {
    const NetConfig cfg = tiny_config();
    RngStream rng(11);
    RngStream grng(12);
    for (int trial = 0; trial < 5; ++trial) {
        ParameterGrid grid(cfg, rng);
        grid.add_head(0, 2, rng);
        const PathGenotype g = PathGenotype::random(cfg, grng);
        const Matrix x = random_batch(3, cfg.input_dim, grng);
        const std::vector<int> labels{0, 1, 0};

        const auto loss_at = [&](ParameterGrid& gr) {
            const Matrix logits = gr.forward(g, 0, x);
            return softmax_xent(logits, labels).loss;
        };

        // analytic step with lr=1: params' = params - grad
        ParameterGrid stepped = grid;
        {
            PathActivation act;
            const Matrix logits = stepped.forward(g, 0, x);
            PathActivation act2;
            stepped.forward(g, 0, x, &act2);
            const XentResult xr = softmax_xent(logits, labels);
            stepped.backward_and_step(g, 0, act2, xr.dlogits, 1.0);
        }

        const double h = 1e-5;
        int checked = 0;
        for (int l = 0; l < cfg.layers; ++l) {
            for (int m : g.active_set(l)) {
                auto& W = grid.module(l, m).W;
                for (std::size_t i = 0; i < std::min<std::size_t>(W.size(), 6); ++i) {
                    const double analytic =
                        grid.module(l, m).W.data()[i] - stepped.module(l, m).W.data()[i];
                    const double keep = W.data()[i];
                    W.data()[i] = keep + h;
                    const double up = loss_at(grid);
                    W.data()[i] = keep - h;
                    const double down = loss_at(grid);
                    W.data()[i] = keep;
                    const double fd = (up - down) / (2 * h);
                    CHECK(std::abs(analytic - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
                    ++checked;
                }
            }
        }
        CHECK(checked > 0);
    }
}

TEST_CASE("locality: a step changes only the head and active unfrozen modules") {
    const NetConfig cfg = tiny_config();
    RngStream rng(13);
    ParameterGrid grid(cfg, rng);
    grid.add_head(0, 2, rng);
    RngStream grng(14);
    const PathGenotype g = PathGenotype::random(cfg, grng);
    const Matrix x = random_batch(4, cfg.input_dim, grng);
    const std::vector<int> labels{0, 1, 1, 0};

    const ParameterGrid before = grid;
    PathActivation act;
    const Matrix logits = grid.forward(g, 0, x, &act);
    grid.backward_and_step(g, 0, act, softmax_xent(logits, labels).dlogits, 0.5);

    for (int l = 0; l < cfg.layers; ++l) {
        const std::vector<int> active = g.active_set(l);
        for (int m = 0; m < cfg.modules_per_layer; ++m) {
            const bool is_active =
                std::find(active.begin(), active.end(), m) != active.end();
            const bool changed = !(grid.module(l, m).W == before.module(l, m).W) ||
                                 grid.module(l, m).b != before.module(l, m).b;
            if (!is_active) CHECK(!changed);
        }
    }
    CHECK(!(grid.head(0).W == before.head(0).W));

    // lr = 0 changes nothing
    ParameterGrid frozen_lr = before;
    PathActivation act2;
    const Matrix logits2 = frozen_lr.forward(g, 0, x, &act2);
    frozen_lr.backward_and_step(g, 0, act2, softmax_xent(logits2, labels).dlogits, 0.0);
    CHECK(flatten_grid(frozen_lr) == flatten_grid(before));
}

TEST_CASE("freeze semantics: frozen params bit-identical through training") {
    const NetConfig cfg = tiny_config();
    RngStream rng(15);
    ParameterGrid grid(cfg, rng);
    grid.add_head(0, 2, rng);
    RngStream grng(16);
    const PathGenotype frozen_path = PathGenotype::random(cfg, grng);
    grid.freeze_path(frozen_path);
    grid.freeze_path(frozen_path); // idempotent
    const int count = grid.frozen_count();
    CHECK(count <= cfg.max_path_width * cfg.layers);
    CHECK(count >= cfg.layers);

    std::vector<std::vector<double>> frozen_before;
    for (int l = 0; l < cfg.layers; ++l) {
        for (int m : frozen_path.active_set(l)) {
            frozen_before.push_back(grid.module(l, m).W.data());
            frozen_before.push_back(grid.module(l, m).b);
        }
    }

    // train an overlapping path for many steps
    for (int step = 0; step < 200; ++step) {
        const PathGenotype g = PathGenotype::random(cfg, grng);
        const Matrix x = random_batch(4, cfg.input_dim, grng);
        const std::vector<int> labels{0, 1, 0, 1};
        PathActivation act;
        const Matrix logits = grid.forward(g, 0, x, &act);
        grid.backward_and_step(g, 0, act, softmax_xent(logits, labels).dlogits, 0.1);
    }

    std::size_t idx = 0;
    for (int l = 0; l < cfg.layers; ++l) {
        for (int m : frozen_path.active_set(l)) {
            CHECK(grid.module(l, m).W.data() == frozen_before[idx++]);
            CHECK(grid.module(l, m).b == frozen_before[idx++]);
        }
    }

    // all active frozen -> only the head changes
    ParameterGrid copy = grid;
    PathActivation act;
    const Matrix x = random_batch(4, cfg.input_dim, grng);
    const Matrix logits = grid.forward(frozen_path, 0, x, &act);
    const std::vector<int> more_labels{0, 1, 0, 1};
    grid.backward_and_step(frozen_path, 0, act, softmax_xent(logits, more_labels).dlogits, 0.1);
    CHECK(flatten_grid(grid) == flatten_grid(copy));
    CHECK(!(grid.head(0).W == copy.head(0).W));
}

TEST_CASE("reinit_unfrozen redraws exactly the unfrozen modules") {
    const NetConfig cfg = tiny_config();
    RngStream rng(17);
    ParameterGrid grid(cfg, rng);
    grid.add_head(0, 2, rng);
    RngStream grng(18);
    const PathGenotype path = PathGenotype::random(cfg, grng);

    SUBCASE("no frozen modules: everything redrawn") {
        const ParameterGrid before = grid;
        RngStream reinit(19);
        grid.reinit_unfrozen(reinit);
        int unchanged = 0;
        for (int l = 0; l < cfg.layers; ++l) {
            for (int m = 0; m < cfg.modules_per_layer; ++m) {
                if (grid.module(l, m).W == before.module(l, m).W) ++unchanged;
            }
        }
        CHECK(unchanged == 0);
    }

    SUBCASE("frozen-only path output is unchanged by reinit") {
        grid.freeze_path(path);
        const Matrix x = random_batch(3, cfg.input_dim, grng);
        const Matrix before = grid.forward(path, 0, x);
        RngStream reinit(20);
        grid.reinit_unfrozen(reinit);
        const Matrix after = grid.forward(path, 0, x);
        CHECK(before.data() == after.data());
    }

    SUBCASE("all modules frozen: grid untouched") {
        PathGenotype everything(cfg.modules_per_layer, cfg.layers);
        for (int i = 0; i < cfg.modules_per_layer; ++i) {
            for (int l = 0; l < cfg.layers; ++l) everything.entry(i, l) = i;
        }
        grid.freeze_path(everything);
        const ParameterGrid before = grid;
        RngStream reinit(21);
        grid.reinit_unfrozen(reinit);
        CHECK(flatten_grid(grid) == flatten_grid(before));
    }
}

TEST_CASE("always_include_frozen unions the frozen path into every layer") {
    NetConfig cfg = tiny_config();
    cfg.always_include_frozen = true;
    RngStream rng(22);
    ParameterGrid grid(cfg, rng);
    grid.add_head(0, 2, rng);
    RngStream grng(23);

    PathGenotype frozen_path(2, 3);
    for (int l = 0; l < 3; ++l) {
        frozen_path.entry(0, l) = 0;
        frozen_path.entry(1, l) = 1;
    }
    PathGenotype other(2, 3);
    for (int l = 0; l < 3; ++l) {
        other.entry(0, l) = 2;
        other.entry(1, l) = 3;
    }
    const Matrix x = random_batch(2, cfg.input_dim, grng);
    const Matrix before_freeze = grid.forward(other, 0, x);
    grid.freeze_path(frozen_path);
    const Matrix after_freeze = grid.forward(other, 0, x);
    CHECK(before_freeze.data() != after_freeze.data()); // frozen modules now contribute
    CHECK(grid.effective_active(other, 0) == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    const NetConfig cfg = tiny_config();
    RngStream rng(24);
    ParameterGrid grid(cfg, rng);
    grid.add_head(0, 2, rng);
    grid.add_head(5, 3, rng);
    RngStream grng(25);
    grid.freeze_path(PathGenotype::random(cfg, grng));

    const auto path = std::filesystem::temp_directory_path() / "pathnet_test.grid";
    Checkpoint::save(grid, path);
    const ParameterGrid loaded = Checkpoint::load(path);
    CHECK(loaded == grid);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects garbage") {
    const auto path = std::filesystem::temp_directory_path() / "pathnet_bad.grid";
    {
        std::ofstream out(path, std::ios::binary);
        out << "not a checkpoint";
    }
    CHECK_THROWS_AS(Checkpoint::load(path), FormatError);
    std::filesystem::remove(path);
}
