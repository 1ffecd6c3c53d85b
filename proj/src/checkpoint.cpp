#include "pathnet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "pathnet/errors.hpp"

// Raw-word binary format; written and read on little-endian hosts only.
static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace pathnet {
namespace {

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot open " + path.string() + " for writing");
    }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void i64(std::int64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void f64s(const std::vector<double>& v) {
        i64(static_cast<std::int64_t>(v.size()));
        raw(v.data(), v.size() * sizeof(double));
    }
    void matrix(const Matrix& m) {
        i64(static_cast<std::int64_t>(m.rows()));
        i64(static_cast<std::int64_t>(m.cols()));
        raw(m.data().data(), m.size() * sizeof(double));
    }

private:
    void raw(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
        if (!in_) throw DataError("cannot open " + path.string());
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, sizeof v);
        return v;
    }
    std::int64_t i64() {
        std::int64_t v;
        raw(&v, sizeof v);
        return v;
    }
    double f64() {
        double v;
        raw(&v, sizeof v);
        return v;
    }
    std::vector<double> f64s() {
        const std::int64_t n = len();
        std::vector<double> v(static_cast<std::size_t>(n));
        raw(v.data(), v.size() * sizeof(double));
        return v;
    }
    Matrix matrix() {
        const std::int64_t r = len();
        const std::int64_t c = len();
        Matrix m(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        raw(m.data().data(), m.size() * sizeof(double));
        return m;
    }
    std::size_t offset() const { return offset_; }

private:
    std::int64_t len() {
        const std::int64_t n = i64();
        if (n < 0 || n > (1LL << 32)) throw FormatError("implausible length field", offset_ - 8);
        return n;
    }
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) {
            throw FormatError("truncated checkpoint", offset_);
        }
        offset_ += n;
    }
    std::ifstream in_;
    std::size_t offset_ = 0;
};

void write_genotype(Writer& w, const PathGenotype& g) {
    w.i64(g.width());
    w.i64(g.layers());
    for (int e : g.entries()) w.i64(e);
}

PathGenotype read_genotype(Reader& r) {
    const int width = static_cast<int>(r.i64());
    const int layers = static_cast<int>(r.i64());
    PathGenotype g(width, layers);
    for (int i = 0; i < width; ++i) {
        for (int l = 0; l < layers; ++l) {
            g.entry(i, l) = static_cast<int>(r.i64());
        }
    }
    return g;
}

} // namespace

void Checkpoint::save(const ParameterGrid& grid, const std::filesystem::path& path) {
    Writer w(path);
    w.u32(kMagic);
    w.u32(kVersion);
    const NetConfig& cfg = grid.config();
    w.i64(cfg.layers);
    w.i64(cfg.modules_per_layer);
    w.i64(cfg.neurons_per_module);
    w.i64(cfg.max_path_width);
    w.i64(cfg.input_dim);
    w.i64(cfg.always_include_frozen ? 1 : 0);
    for (int l = 0; l < cfg.layers; ++l) {
        for (int m = 0; m < cfg.modules_per_layer; ++m) {
            const ModuleParams& p = grid.module(l, m);
            w.matrix(p.W);
            w.f64s(p.b);
            w.i64(grid.is_frozen(l, m) ? 1 : 0);
        }
    }
    w.i64(static_cast<std::int64_t>(grid.heads().size()));
    for (const auto& [task, p] : grid.heads()) {
        w.i64(task);
        w.matrix(p.W);
        w.f64s(p.b);
    }
    w.i64(grid.frozen_path() ? 1 : 0);
    if (grid.frozen_path()) write_genotype(w, *grid.frozen_path());
}

ParameterGrid Checkpoint::load(const std::filesystem::path& path) {
    Reader r(path);
    if (r.u32() != kMagic) throw FormatError("bad checkpoint magic", 0);
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
    }
    ParameterGrid grid;
    grid.cfg_.layers = static_cast<int>(r.i64());
    grid.cfg_.modules_per_layer = static_cast<int>(r.i64());
    grid.cfg_.neurons_per_module = static_cast<int>(r.i64());
    grid.cfg_.max_path_width = static_cast<int>(r.i64());
    grid.cfg_.input_dim = static_cast<int>(r.i64());
    grid.cfg_.always_include_frozen = r.i64() != 0;
    grid.cfg_.validate();

    const std::size_t count =
        static_cast<std::size_t>(grid.cfg_.layers) * grid.cfg_.modules_per_layer;
    grid.modules_.resize(count);
    grid.frozen_.assign(count, 0);
    grid.frozen_sets_.assign(grid.cfg_.layers, {});
    for (int l = 0; l < grid.cfg_.layers; ++l) {
        for (int m = 0; m < grid.cfg_.modules_per_layer; ++m) {
            ModuleParams& p = grid.modules_[grid.slot(l, m)];
            p.W = r.matrix();
            p.b = r.f64s();
            if (r.i64() != 0) {
                grid.frozen_[grid.slot(l, m)] = 1;
                grid.frozen_sets_[l].push_back(m); // m ascending, stays sorted
            }
        }
    }
    const std::int64_t head_count = r.i64();
    for (std::int64_t i = 0; i < head_count; ++i) {
        const int task = static_cast<int>(r.i64());
        ModuleParams p;
        p.W = r.matrix();
        p.b = r.f64s();
        grid.heads_[task] = std::move(p);
    }
    if (r.i64() != 0) grid.frozen_path_ = read_genotype(r);
    return grid;
}

} // namespace pathnet
