#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pathnet {

class RngStream;

/// Dense row-major matrix of doubles. 64-bit floats are used everywhere so
/// that frozen-parameter checks can compare byte representations exactly.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// x W^T + b, broadcast over the batch rows of x. W is (out x in).
Matrix linear_forward(const Matrix& W, std::span<const double> b, const Matrix& x);

/// Elementwise max(0, x).
Matrix relu(Matrix x);

struct XentResult {
    double loss;    // mean cross-entropy over the batch
    Matrix dlogits; // (softmax - onehot) / batch
};

/// Softmax cross-entropy with integer class labels, numerically stabilized.
XentResult softmax_xent(const Matrix& logits, std::span<const int> labels);

/// In-place param -= lr * grad.
void sgd_step(Matrix& param, const Matrix& grad, double lr);
void sgd_step(std::vector<double>& param, const std::vector<double>& grad, double lr);

/// Glorot-uniform fill: entries in [-sqrt(6/(fan_in+fan_out)), +...].
void glorot_fill(Matrix& W, std::size_t fan_in, std::size_t fan_out, RngStream& rng);

} // namespace pathnet
