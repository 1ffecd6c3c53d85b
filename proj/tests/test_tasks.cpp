#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "pathnet/errors.hpp"
#include "pathnet/tasks.hpp"

using namespace pathnet;
namespace fs = std::filesystem;

namespace {

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

// tiny IDX fixture: `n` images of 2x2 pixels with the given labels
fs::path write_fixture(int n, const std::vector<unsigned char>& pixels,
                       const std::vector<unsigned char>& labels) {
    const fs::path dir = fs::temp_directory_path() / "pathnet_idx_fixture";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "train-images-idx3-ubyte", std::ios::binary);
        write_be32(out, 0x00000803);
        write_be32(out, static_cast<std::uint32_t>(n));
        write_be32(out, 2);
        write_be32(out, 2);
        out.write(reinterpret_cast<const char*>(pixels.data()),
                  static_cast<std::streamsize>(pixels.size()));
    }
    {
        std::ofstream out(dir / "train-labels-idx1-ubyte", std::ios::binary);
        write_be32(out, 0x00000801);
        write_be32(out, static_cast<std::uint32_t>(n));
        out.write(reinterpret_cast<const char*>(labels.data()),
                  static_cast<std::streamsize>(labels.size()));
    }
    return dir;
}

} // namespace

TEST_CASE("IDX fixture round-trips pixels and labels exactly") {
    const std::vector<unsigned char> pixels{0, 51, 102, 255, 255, 204, 153, 0};
    const std::vector<unsigned char> labels{5, 6};
    const fs::path dir = write_fixture(2, pixels, labels);

    const MnistData data = load_mnist_train(dir);
    CHECK(data.images.count == 2);
    CHECK(data.images.rows == 2);
    CHECK(data.images.cols == 2);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        CHECK(data.images.pixels[i] == doctest::Approx(pixels[i] / 255.0).epsilon(1e-12));
    }
    CHECK(data.labels == std::vector<int>{5, 6});
}

TEST_CASE("IDX loader reports bad magic and truncation with offsets") {
    const fs::path dir = fs::temp_directory_path() / "pathnet_idx_bad";
    fs::create_directories(dir);
    const fs::path bad_magic = dir / "bad_magic";
    {
        std::ofstream out(bad_magic, std::ios::binary);
        write_be32(out, 0xdeadbeef);
        write_be32(out, 1);
        write_be32(out, 2);
        write_be32(out, 2);
    }
    CHECK_THROWS_AS(load_idx_images(bad_magic), FormatError);

    const fs::path truncated = dir / "truncated";
    {
        std::ofstream out(truncated, std::ios::binary);
        write_be32(out, 0x00000803);
        write_be32(out, 100); // claims 100 images, provides none
        write_be32(out, 2);
        write_be32(out, 2);
    }
    try {
        load_idx_images(truncated);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.byte_offset() == 16);
    }
    CHECK_THROWS_AS(load_idx_labels(fs::path("/nonexistent/labels")), DataError);
}

TEST_CASE("salt_pepper: identity at 0, extremes at 1") {
    RngStream rng(1);
    std::vector<double> img(784);
    for (double& v : img) v = rng.uniform(0.0, 1.0);
    std::vector<double> copy = img;
    salt_pepper(copy, 0.0, rng);
    CHECK(copy == img);

    salt_pepper(copy, 1.0, rng);
    long ones = 0;
    for (double v : copy) {
        CHECK((v == 0.0 || v == 1.0));
        if (v == 1.0) ++ones;
    }
    // mean ~ 0.5 within 3 sigma of binomial(784, 0.5)
    const double sigma = std::sqrt(784 * 0.25);
    CHECK(std::abs(ones - 392.0) <= 3 * sigma);
}

TEST_CASE("salt_pepper corruption count is binomial at p=0.5") {
    RngStream rng(2);
    const int trials = 200;
    long corrupted = 0;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> img(784, 0.5); // 0.5 can only leave by corruption
        salt_pepper(img, 0.5, rng);
        for (double v : img) {
            if (v != 0.5) ++corrupted;
        }
    }
    const double n = 784.0 * trials;
    const double expected = n * 0.5;
    const double sigma = std::sqrt(n * 0.25);
    CHECK(std::abs(corrupted - expected) <= 3 * sigma);
}

TEST_CASE("binary task filters, relabels, and reproduces streams") {
    // 6 images: digits 5, 6, 3, 5, 6, 5
    std::vector<unsigned char> pixels(6 * 4, 128);
    const fs::path dir = write_fixture(6, pixels, {5, 6, 3, 5, 6, 5});
    auto data = std::make_shared<const MnistData>(load_mnist_train(dir));

    const TaskSpec task = make_binary_task(data, 5, 6, 0.0, 99, 0);
    CHECK(task.classes == 2);
    CHECK(task.input_dim == 4);

    auto s1 = task.make_stream(7);
    auto s2 = task.make_stream(7);
    auto s3 = task.make_stream(8);
    const Batch b1 = s1->next(1000);
    const Batch b2 = s2->next(1000);
    CHECK(b1.x == b2.x);
    CHECK(b1.labels == b2.labels);
    const Batch b3 = s3->next(1000);
    CHECK(b1.labels != b3.labels);

    // labels only {0,1}; with noise 0, every pixel is 128/255
    long zeros = 0;
    for (int y : b1.labels) {
        CHECK((y == 0 || y == 1));
        if (y == 0) ++zeros;
    }
    // 3 fives vs 2 sixes per epoch of 5 -> 600 vs 400
    CHECK(zeros == 600);
    for (double v : b1.x.data()) CHECK(v == doctest::Approx(128.0 / 255.0));

    CHECK_THROWS_AS(make_binary_task(data, 5, 5, 0.5, 1, 0), InputError);
    CHECK_THROWS_AS(make_binary_task(data, 0, 1, 0.5, 1, 0), DataError);
}

TEST_CASE("noise is redrawn per emission") {
    std::vector<unsigned char> pixels(2 * 4, 128);
    const fs::path dir = write_fixture(2, pixels, {5, 6});
    auto data = std::make_shared<const MnistData>(load_mnist_train(dir));
    const TaskSpec task = make_binary_task(data, 5, 6, 0.5, 4, 0);
    auto stream = task.make_stream(1);
    // same underlying 2 images emitted over and over; corrupted copies differ
    const Batch a = stream->next(2);
    const Batch b = stream->next(2);
    CHECK(a.x != b.x);
    for (double v : a.x.data()) {
        CHECK((v == 0.0 || v == 1.0 || v == doctest::Approx(128.0 / 255.0)));
    }
}

TEST_CASE("synthetic streams are reproducible and well-formed") {
    for (const SyntheticKind kind : {SyntheticKind::LinearlySeparable, SyntheticKind::XorLike,
                                     SyntheticKind::ParityBits}) {
        const TaskSpec task = make_synthetic(kind, 4, 11, 0);
        auto s1 = task.make_stream(3);
        auto s2 = task.make_stream(3);
        const Batch b1 = s1->next(256);
        const Batch b2 = s2->next(256);
        CHECK(b1.x == b2.x);
        CHECK(b1.labels == b2.labels);
        bool saw[2] = {false, false};
        for (int y : b1.labels) {
            REQUIRE(y >= 0);
            REQUIRE(y <= 1);
            saw[y] = true;
        }
        CHECK(saw[0]);
        CHECK(saw[1]);
        for (double v : b1.x.data()) CHECK(std::isfinite(v));
    }
    CHECK_THROWS_AS(make_synthetic(SyntheticKind::XorLike, 1, 1, 0), InputError);
}

TEST_CASE("parity of two bits is XOR of the first two coordinates") {
    const TaskSpec task = make_synthetic(SyntheticKind::ParityBits, 5, 13, 0);
    auto stream = task.make_stream(2);
    const Batch b = stream->next(512);
    for (std::size_t r = 0; r < b.x.rows(); ++r) {
        const int want = (b.x(r, 0) > 0.5) != (b.x(r, 1) > 0.5) ? 1 : 0;
        CHECK(b.labels[r] == want);
    }
}

TEST_CASE("synthetic kind names parse") {
    CHECK(synthetic_kind_from_name("xor") == SyntheticKind::XorLike);
    CHECK(synthetic_kind_from_name("linsep") == SyntheticKind::LinearlySeparable);
    CHECK(synthetic_kind_from_name("parity") == SyntheticKind::ParityBits);
    CHECK_THROWS_AS(synthetic_kind_from_name("mnist17"), InputError);
}
