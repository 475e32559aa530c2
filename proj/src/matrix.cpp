#include "fnbench/matrix.hpp"

#include "fnbench/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fnbench {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows_in) {
    if (rows_in.empty()) return {};
    Matrix m(rows_in.size(), rows_in[0].size());
    for (std::size_t i = 0; i < rows_in.size(); ++i) {
        if (rows_in[i].size() != m.cols)
            throw shape_error("from_rows: ragged input at row " + std::to_string(i));
        std::copy(rows_in[i].begin(), rows_in[i].end(), m.row(i));
    }
    return m;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw shape_error(std::string(op) + ": shape mismatch " + a.shape_str() +
                          " vs " + b.shape_str());
}

// i-k-j order: C[i][j] accumulates over ascending k, identical to the naive
// triple loop, while streaming rows of B.
void accumulate_product(Matrix& c, const Matrix& a, const Matrix& b) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw shape_error("matmul: inner dimensions differ, " + a.shape_str() +
                          " x " + b.shape_str());
    Matrix c(a.rows, b.cols);
    accumulate_product(c, a, b);
    ensure_finite(c, "matmul");
    return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows)
        throw shape_error("matmul_at_b: row counts differ, " + a.shape_str() +
                          " vs " + b.shape_str());
    Matrix c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* ak = a.row(k);
        const double* bk = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
        }
    }
    ensure_finite(c, "matmul_at_b");
    return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw shape_error("matmul_a_bt: column counts differ, " + a.shape_str() +
                          " vs " + b.shape_str());
    // Materializing B^T keeps the inner loop on contiguous rows; the per-entry
    // accumulation order over k is unchanged.
    const Matrix bt = transpose(b);
    Matrix c(a.rows, b.rows);
    accumulate_product(c, a, bt);
    ensure_finite(c, "matmul_a_bt");
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

void add_inplace(Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add_inplace");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void axpy_inplace(Matrix& a, double alpha, const Matrix& b) {
    require_same_shape(a, b, "axpy_inplace");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += alpha * b.data[i];
}

Matrix scale(const Matrix& a, double alpha) {
    Matrix c = a;
    for (double& v : c.data) v *= alpha;
    return c;
}

Matrix colsum(const Matrix& a) {
    Matrix s(1, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) s.data[j] += ai[j];
    }
    return s;
}

void add_row_inplace(Matrix& a, const Matrix& b) {
    if (b.rows != 1 || b.cols != a.cols)
        throw shape_error("add_row_inplace: expected 1x" + std::to_string(a.cols) +
                          ", got " + b.shape_str());
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* ai = a.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) ai[j] += b.data[j];
    }
}

Matrix relu(const Matrix& x) {
    Matrix y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

Matrix relu_backward(const Matrix& grad, const Matrix& pre) {
    require_same_shape(grad, pre, "relu_backward");
    Matrix g = grad;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (pre.data[i] <= 0.0) g.data[i] = 0.0;
    return g;
}

Matrix elu(const Matrix& x) {
    Matrix y = x;
    for (double& v : y.data) v = v > 0.0 ? v : std::expm1(v);
    return y;
}

Matrix elu_backward(const Matrix& grad, const Matrix& pre) {
    require_same_shape(grad, pre, "elu_backward");
    Matrix g = grad;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (pre.data[i] <= 0.0) g.data[i] *= std::exp(pre.data[i]);
    return g;
}

Matrix softmax_rows(const Matrix& x) {
    if (x.cols == 0) throw shape_error("softmax_rows: zero columns");
    Matrix y = x;
    for (std::size_t i = 0; i < y.rows; ++i) {
        double* yi = y.row(i);
        double mx = yi[0];
        for (std::size_t j = 1; j < y.cols; ++j) mx = std::max(mx, yi[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < y.cols; ++j) {
            yi[j] = std::exp(yi[j] - mx);
            sum += yi[j];
        }
        for (std::size_t j = 0; j < y.cols; ++j) yi[j] /= sum;
    }
    return y;
}

LossGrad cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    if (labels.size() != logits.rows)
        throw shape_error("cross_entropy: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(logits.rows) + " rows");
    if (logits.rows == 0) throw shape_error("cross_entropy: empty logits");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits.cols)
            throw validation_error("cross_entropy: label " + std::to_string(labels[i]) +
                                   " out of range at row " + std::to_string(i));

    LossGrad out;
    out.grad = softmax_rows(logits);
    const double inv_rows = 1.0 / static_cast<double>(logits.rows);
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        double* gi = out.grad.row(i);
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        // log prob computed from the stable softmax row
        loss -= std::log(std::max(gi[y], 1e-300));
        gi[y] -= 1.0;
        for (std::size_t j = 0; j < logits.cols; ++j) gi[j] *= inv_rows;
    }
    out.loss = loss * inv_rows;
    if (!std::isfinite(out.loss)) throw numeric_error("cross_entropy: non-finite loss");
    return out;
}

bool all_finite(const Matrix& x) {
    double acc = 0.0;
    for (const double v : x.data) acc += std::abs(v);
    return std::isfinite(acc);
}

void ensure_finite(const Matrix& x, const char* what) {
    if (!all_finite(x))
        throw numeric_error(std::string(what) + ": non-finite entries");
}

} // namespace fnbench
