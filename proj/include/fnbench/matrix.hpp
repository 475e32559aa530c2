#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fnbench {

/// Row-major dense matrix of 64-bit floats. All kernels accumulate in a
/// fixed sequential order so repeated runs are bit-identical.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // rows * cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    /// Build from nested initializer-style rows; all rows must have equal length.
    static Matrix from_rows(const std::vector<std::vector<double>>& rows_in);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    std::span<const double> row_span(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool empty() const { return rows == 0 || cols == 0; }
    std::size_t size() const { return data.size(); }
    std::string shape_str() const;
};

/// a (m x k) times b (k x n). Throws shape_error naming both shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// transpose(a) * b without materializing the transpose.
Matrix matmul_at_b(const Matrix& a, const Matrix& b);

/// a * transpose(b) without materializing the transpose.
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
void add_inplace(Matrix& a, const Matrix& b);
void axpy_inplace(Matrix& a, double alpha, const Matrix& b); // a += alpha * b
Matrix scale(const Matrix& a, double alpha);

/// Sum over rows, returns 1 x cols.
Matrix colsum(const Matrix& a);

/// Adds the 1 x cols row vector b to every row of a.
void add_row_inplace(Matrix& a, const Matrix& b);

Matrix relu(const Matrix& x);
/// grad masked by the sign of the pre-activation (subgradient 0 at 0).
Matrix relu_backward(const Matrix& grad, const Matrix& pre);

Matrix elu(const Matrix& x);
Matrix elu_backward(const Matrix& grad, const Matrix& pre);

/// Row-wise softmax with max subtraction. Every output row is non-negative
/// and sums to 1 within 1e-12.
Matrix softmax_rows(const Matrix& x);

struct LossGrad {
    double loss = 0.0;
    Matrix grad; // same shape as the logits
};

/// Mean negative log softmax-probability of the true class.
/// grad = (softmax - one_hot) / rows. Labels must index valid columns.
LossGrad cross_entropy(const Matrix& logits, const std::vector<int>& labels);

bool all_finite(const Matrix& x);

/// Throws numeric_error mentioning `what` if x contains NaN or Inf.
void ensure_finite(const Matrix& x, const char* what);

} // namespace fnbench
