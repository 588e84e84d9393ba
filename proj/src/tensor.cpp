#include "convgraph/tensor.hpp"

#include <cmath>
#include <string>

#include "convgraph/error.hpp"

namespace convgraph {

Matrix Matrix::randn(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Matrix m(rows, cols);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : m.values_) v = dist(rng);
    return m;
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw InvalidState(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                           ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

namespace {

void prepare_out(Matrix& out, std::size_t rows, std::size_t cols, bool accumulate, const char* what) {
    if (accumulate) {
        require_shape(out, rows, cols, what);
    } else if (out.rows() != rows || out.cols() != cols) {
        out = Matrix(rows, cols);
    } else {
        out.fill(0.0);
    }
}

}  // namespace

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
    if (a.cols() != b.cols()) throw InvalidState("matmul_nt: inner dimension mismatch");
    prepare_out(out, a.rows(), b.rows(), accumulate, "matmul_nt");
    const std::size_t k = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.row(i).data();
        double* orow = out.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* br = b.row(j).data();
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
            orow[j] += acc;
        }
    }
}

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
    if (a.cols() != b.rows()) throw InvalidState("matmul_nn: inner dimension mismatch");
    prepare_out(out, a.rows(), b.cols(), accumulate, "matmul_nn");
    const std::size_t m = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.row(i).data();
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const double av = a(i, p);
            if (av == 0.0) continue;
            const double* br = b.row(p).data();
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * br[j];
        }
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
    if (a.rows() != b.rows()) throw InvalidState("matmul_tn: inner dimension mismatch");
    prepare_out(out, a.cols(), b.cols(), accumulate, "matmul_tn");
    const std::size_t m = b.cols();
    for (std::size_t p = 0; p < a.rows(); ++p) {
        const double* ar = a.row(p).data();
        const double* br = b.row(p).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double av = ar[i];
            if (av == 0.0) continue;
            double* orow = out.row(i).data();
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * br[j];
        }
    }
}

void add_inplace(Matrix& target, const Matrix& other) {
    require_shape(other, target.rows(), target.cols(), "add_inplace");
    auto t = target.values();
    auto o = other.values();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += o[i];
}

double frobenius_norm(const Matrix& m) {
    double sum = 0.0;
    for (double v : m.values()) sum += v * v;
    return std::sqrt(sum);
}

bool all_finite(const Matrix& m) {
    for (double v : m.values()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace convgraph
