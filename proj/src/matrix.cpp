#include "pathnet/matrix.hpp"

#include <atomic>
#include <cmath>
#include <cstddef>

#include "pathnet/errors.hpp"
#include "pathnet/rng.hpp"

namespace pathnet {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix linear_forward(const Matrix& W, std::span<const double> b, const Matrix& x) {
    if (x.cols() != W.cols()) {
        throw DimensionError("linear_forward: x has " + std::to_string(x.cols()) +
                             " cols, W expects " + std::to_string(W.cols()));
    }
    if (b.size() != W.rows()) {
        throw DimensionError("linear_forward: bias length " + std::to_string(b.size()) +
                             " != W rows " + std::to_string(W.rows()));
    }
    Matrix out(x.rows(), W.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t o = 0; o < W.rows(); ++o) {
            double acc = b[o];
            for (std::size_t c = 0; c < x.cols(); ++c) {
                acc += x(r, c) * W(o, c);
            }
            out(r, o) = acc;
        }
    }
    return out;
}

Matrix relu(Matrix x) {
    for (double& v : x.data()) {
        if (v < 0.0) v = 0.0;
    }
    return x;
}

XentResult softmax_xent(const Matrix& logits, std::span<const int> labels) {
    if (labels.size() != logits.rows()) {
        throw DimensionError("softmax_xent: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(logits.rows()) + " rows");
    }
    const std::size_t batch = logits.rows();
    const std::size_t classes = logits.cols();
    XentResult result{0.0, Matrix(batch, classes)};
    for (std::size_t r = 0; r < batch; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw InputError("softmax_xent: label " + std::to_string(y) +
                             " out of range [0, " + std::to_string(classes) + ")");
        }
        double maxv = logits(r, 0);
        for (std::size_t c = 1; c < classes; ++c) maxv = std::max(maxv, logits(r, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(logits(r, c) - maxv);
        const double logz = maxv + std::log(denom);
        result.loss += (logz - logits(r, static_cast<std::size_t>(y))) / static_cast<double>(batch);
        for (std::size_t c = 0; c < classes; ++c) {
            const double p = std::exp(logits(r, c) - logz);
            result.dlogits(r, c) =
                (p - (c == static_cast<std::size_t>(y) ? 1.0 : 0.0)) / static_cast<double>(batch);
        }
    }
    return result;
}

namespace {

// Updates go through atomic_ref so concurrent Hogwild writers stay defined
// behavior; ordering is relaxed by contract.
void racy_axpy(double* p, const double* g, std::size_t n, double lr) {
    for (std::size_t i = 0; i < n; ++i) {
        std::atomic_ref<double> cell(p[i]);
        const double v = cell.load(std::memory_order_relaxed) - lr * g[i];
        cell.store(v, std::memory_order_relaxed);
    }
}

} // namespace

void sgd_step(Matrix& param, const Matrix& grad, double lr) {
    if (!param.same_shape(grad)) {
        throw DimensionError("sgd_step: param/grad shape mismatch");
    }
    racy_axpy(param.data().data(), grad.data().data(), param.size(), lr);
}

void sgd_step(std::vector<double>& param, const std::vector<double>& grad, double lr) {
    if (param.size() != grad.size()) {
        throw DimensionError("sgd_step: param/grad length mismatch");
    }
    racy_axpy(param.data(), grad.data(), param.size(), lr);
}

void glorot_fill(Matrix& W, std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : W.data()) {
        v = rng.uniform(-limit, limit);
    }
}

} // namespace pathnet
