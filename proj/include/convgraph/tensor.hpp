#pragma once
// Dense row-major matrices in double precision and the handful of kernels the models need.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace convgraph {

using Rng = std::mt19937_64;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    static Matrix zeros_like(const Matrix& other) { return Matrix(other.rows_, other.cols_); }
    // Entries drawn from N(0, stddev^2).
    static Matrix randn(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    void fill(double value) { std::fill(values_.begin(), values_.end(), value); }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// out (+)= a * b^T with a: n x k, b: m x k.
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
// out (+)= a * b with a: n x k, b: k x m.
void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
// out (+)= a^T * b with a: k x n, b: k x m.
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

// Throws InvalidState unless the shapes agree.
void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what);

void add_inplace(Matrix& target, const Matrix& other);
double frobenius_norm(const Matrix& m);
bool all_finite(const Matrix& m);

}  // namespace convgraph
