#pragma once

#include <cstddef>
#include <vector>

namespace udg {

// Dense row-major matrix of doubles. data.size() == rows*cols always.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values);

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }

    bool empty() const { return rows == 0 || cols == 0; }
};

// C = A(m x k) * B(k x n)
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A(m x k) * B(n x k)^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// C = A(k x m)^T * B(k x n)
Matrix matmul_tn(const Matrix& a, const Matrix& b);

bool all_finite(const Matrix& m);
bool all_finite(const std::vector<double>& v);

double squared_distance(const double* a, const double* b, std::size_t n);

// Scales every row to unit Euclidean norm; zero rows are left untouched.
Matrix l2_normalize_rows(const Matrix& m);

} // namespace udg
