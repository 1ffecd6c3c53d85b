#include "pathnet/tasks.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>

#include "pathnet/errors.hpp"

namespace pathnet {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::ifstream& in, std::size_t offset) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (in.gcount() != 4) throw FormatError("truncated IDX header", offset);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::vector<unsigned char> read_payload(std::ifstream& in, std::size_t n, std::size_t offset) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) {
        throw FormatError("truncated IDX payload, expected " + std::to_string(n) + " bytes",
                          offset + static_cast<std::size_t>(in.gcount()));
    }
    return buf;
}

} // namespace

IdxImages load_idx_images(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const std::uint32_t magic = read_be32(in, 0);
    if (magic != kImagesMagic) {
        throw FormatError("bad IDX image magic 0x" + std::to_string(magic), 0);
    }
    IdxImages out;
    out.count = static_cast<int>(read_be32(in, 4));
    out.rows = static_cast<int>(read_be32(in, 8));
    out.cols = static_cast<int>(read_be32(in, 12));
    const std::size_t n =
        static_cast<std::size_t>(out.count) * out.rows * out.cols;
    const std::vector<unsigned char> raw = read_payload(in, n, 16);
    out.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.pixels[i] = raw[i] / 255.0;
    }
    return out;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const std::uint32_t magic = read_be32(in, 0);
    if (magic != kLabelsMagic) {
        throw FormatError("bad IDX label magic 0x" + std::to_string(magic), 0);
    }
    const std::size_t n = read_be32(in, 4);
    const std::vector<unsigned char> raw = read_payload(in, n, 8);
    return std::vector<int>(raw.begin(), raw.end());
}

MnistData load_mnist_train(const std::filesystem::path& dir) {
    MnistData data;
    data.images = load_idx_images(dir / "train-images-idx3-ubyte");
    data.labels = load_idx_labels(dir / "train-labels-idx1-ubyte");
    if (static_cast<int>(data.labels.size()) != data.images.count) {
        throw DataError("image/label count mismatch in " + dir.string());
    }
    return data;
}

void salt_pepper(std::span<double> image, double noise_prob, RngStream& rng) {
    for (double& px : image) {
        if (rng.bernoulli(noise_prob)) {
            px = rng.bernoulli(0.5) ? 1.0 : 0.0;
        }
    }
}

namespace {

class BinaryMnistStream final : public SampleStream {
public:
    BinaryMnistStream(std::shared_ptr<const MnistData> data, std::vector<int> indices,
                      int digit_a, double noise_prob, std::uint64_t seed)
        : data_(std::move(data)), indices_(std::move(indices)), digit_a_(digit_a),
          noise_prob_(noise_prob), rng_(seed, 0x6d6e6973ULL) {
        dim_ = data_->images.rows * data_->images.cols;
        cursor_ = indices_.size(); // force shuffle on first draw
    }

    Batch next(int batch_size) override {
        Batch batch{Matrix(batch_size, dim_), {}};
        batch.labels.reserve(batch_size);
        for (int r = 0; r < batch_size; ++r) {
            if (cursor_ >= indices_.size()) {
                shuffle_epoch();
            }
            const int idx = indices_[cursor_++];
            const double* src = data_->images.pixels.data() +
                                static_cast<std::size_t>(idx) * dim_;
            double* dst = batch.x.data().data() + static_cast<std::size_t>(r) * dim_;
            std::copy(src, src + dim_, dst);
            salt_pepper({dst, static_cast<std::size_t>(dim_)}, noise_prob_, rng_);
            batch.labels.push_back(data_->labels[idx] == digit_a_ ? 0 : 1);
        }
        return batch;
    }

private:
    void shuffle_epoch() {
        for (std::size_t i = indices_.size(); i > 1; --i) {
            std::swap(indices_[i - 1],
                      indices_[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(i)))]);
        }
        cursor_ = 0;
    }

    std::shared_ptr<const MnistData> data_;
    std::vector<int> indices_;
    int digit_a_;
    double noise_prob_;
    RngStream rng_;
    int dim_ = 0;
    std::size_t cursor_ = 0;
};

} // namespace

TaskSpec make_binary_task(std::shared_ptr<const MnistData> data, int digit_a, int digit_b,
                          double noise_prob, std::uint64_t seed, int task_id) {
    if (digit_a == digit_b) throw InputError("binary task needs two distinct digits");
    if (digit_a < 0 || digit_a > 9 || digit_b < 0 || digit_b > 9) {
        throw InputError("digits must be in [0, 9]");
    }
    std::vector<int> indices;
    for (int i = 0; i < data->images.count; ++i) {
        if (data->labels[i] == digit_a || data->labels[i] == digit_b) {
            indices.push_back(i);
        }
    }
    bool has_a = false, has_b = false;
    for (int i : indices) {
        (data->labels[i] == digit_a ? has_a : has_b) = true;
    }
    if (!has_a || !has_b) {
        throw DataError("no examples for digit " + std::to_string(has_a ? digit_b : digit_a));
    }

    TaskSpec spec;
    spec.task_id = task_id;
    spec.name = "mnist" + std::to_string(digit_a) + "v" + std::to_string(digit_b);
    spec.classes = 2;
    spec.input_dim = data->images.rows * data->images.cols;
    spec.make_stream = [data, indices = std::move(indices), digit_a, noise_prob,
                        seed](std::uint64_t stream_seed) -> std::unique_ptr<SampleStream> {
        return std::make_unique<BinaryMnistStream>(data, indices, digit_a, noise_prob,
                                                   seed ^ stream_seed);
    };
    return spec;
}

namespace {

class SyntheticStream final : public SampleStream {
public:
    SyntheticStream(SyntheticKind kind, int dim, std::vector<double> hyperplane,
                    std::uint64_t seed)
        : kind_(kind), dim_(dim), hyperplane_(std::move(hyperplane)),
          rng_(seed, 0x73796e74ULL) {}

    Batch next(int batch_size) override {
        Batch batch{Matrix(batch_size, dim_), {}};
        batch.labels.reserve(batch_size);
        for (int r = 0; r < batch_size; ++r) {
            batch.labels.push_back(emit(&batch.x(r, 0)));
        }
        return batch;
    }

private:
    int emit(double* x) {
        switch (kind_) {
        case SyntheticKind::LinearlySeparable: {
            double dot = 0.0;
            for (int c = 0; c < dim_; ++c) {
                x[c] = rng_.uniform(-1.0, 1.0);
                dot += x[c] * hyperplane_[c];
            }
            return dot >= 0.0 ? 1 : 0;
        }
        case SyntheticKind::XorLike: {
            for (int c = 0; c < dim_; ++c) x[c] = rng_.uniform(0.0, 1.0);
            return ((x[0] > 0.5) != (x[1] > 0.5)) ? 1 : 0;
        }
        case SyntheticKind::ParityBits: {
            int parity = 0;
            for (int c = 0; c < dim_; ++c) {
                x[c] = rng_.bernoulli(0.5) ? 1.0 : 0.0;
                if (c < 2) parity ^= (x[c] > 0.5);
            }
            return parity;
        }
        }
        return 0;
    }

    SyntheticKind kind_;
    int dim_;
    std::vector<double> hyperplane_;
    RngStream rng_;
};

} // namespace

SyntheticKind synthetic_kind_from_name(const std::string& name) {
    if (name == "linsep") return SyntheticKind::LinearlySeparable;
    if (name == "xor") return SyntheticKind::XorLike;
    if (name == "parity") return SyntheticKind::ParityBits;
    throw InputError("unknown synthetic task kind: " + name);
}

TaskSpec make_synthetic(SyntheticKind kind, int dim, std::uint64_t seed, int task_id) {
    if (dim < 2) throw InputError("synthetic tasks need dim >= 2");
    std::vector<double> hyperplane;
    if (kind == SyntheticKind::LinearlySeparable) {
        RngStream rng(seed, 0x706c616eULL);
        hyperplane.resize(dim);
        for (double& w : hyperplane) w = rng.uniform(-1.0, 1.0);
    }
    TaskSpec spec;
    spec.task_id = task_id;
    spec.classes = 2;
    spec.input_dim = dim;
    switch (kind) {
    case SyntheticKind::LinearlySeparable: spec.name = "linsep" + std::to_string(dim); break;
    case SyntheticKind::XorLike: spec.name = "xor" + std::to_string(dim); break;
    case SyntheticKind::ParityBits: spec.name = "parity" + std::to_string(dim); break;
    }
    spec.make_stream = [kind, dim, hyperplane = std::move(hyperplane),
                        seed](std::uint64_t stream_seed) -> std::unique_ptr<SampleStream> {
        return std::make_unique<SyntheticStream>(kind, dim, hyperplane, seed ^ stream_seed);
    };
    return spec;
}

} // namespace pathnet
