#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pathnet/matrix.hpp"
#include "pathnet/rng.hpp"

namespace pathnet {

struct Batch {
    Matrix x;               // batch x input_dim
    std::vector<int> labels;
};

/// Infinite, seeded sample source. One instance per execution context; a
/// stream is never shared across threads.
class SampleStream {
public:
    virtual ~SampleStream() = default;
    virtual Batch next(int batch_size) = 0;
};

/// A supervised task. Streams are handed out as factories so every worker
/// can own a stream with a seed derived from its id.
struct TaskSpec {
    int task_id = 0;
    std::string name;
    int classes = 2;
    int input_dim = 0;
    double stop_threshold = 0.998;
    std::function<std::unique_ptr<SampleStream>(std::uint64_t stream_seed)> make_stream;
};

/// Images from an IDX3 file, flattened row-major, pixels scaled to [0,1].
struct IdxImages {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<double> pixels; // count * rows * cols
};

IdxImages load_idx_images(const std::filesystem::path& path);
std::vector<int> load_idx_labels(const std::filesystem::path& path);

struct MnistData {
    IdxImages images;
    std::vector<int> labels;
};

/// Loads train-images-idx3-ubyte / train-labels-idx1-ubyte from `dir`.
MnistData load_mnist_train(const std::filesystem::path& dir);

/// Each pixel independently, with probability noise_prob, is replaced by 0
/// or 1 with equal probability.
void salt_pepper(std::span<double> image, double noise_prob, RngStream& rng);

/// Binary classification between two digit classes with per-emission
/// salt-and-pepper corruption. Labels: a -> 0, b -> 1.
TaskSpec make_binary_task(std::shared_ptr<const MnistData> data, int digit_a, int digit_b,
                          double noise_prob, std::uint64_t seed, int task_id);

enum class SyntheticKind { LinearlySeparable, XorLike, ParityBits };

SyntheticKind synthetic_kind_from_name(const std::string& name);

/// Fast synthetic fixtures with analytically known Bayes accuracy (1.0 for
/// all three noiseless generators).
TaskSpec make_synthetic(SyntheticKind kind, int dim, std::uint64_t seed, int task_id);

} // namespace pathnet
