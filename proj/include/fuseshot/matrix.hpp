#pragma once

#include <initializer_list>
#include <vector>

#include "fuseshot/common.hpp"

namespace fuseshot {

// Dense row-major matrix of doubles. Values are treated as immutable once a
// matrix has been handed to the tape; all operations below allocate fresh
// results. Sizes stay small (episodes of a few hundred rows), so the layout
// favours simplicity over blocking tricks.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(checked_extent(rows, cols), 0.0) {}
    Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
            throw ShapeError("matrix data size does not match " + std::to_string(rows) + "x" + std::to_string(cols));
        }
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix constant(int rows, int cols, double v) {
        Matrix m(rows, cols);
        for (double& x : m.data_) x = v;
        return m;
    }
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool is_finite() const;

private:
    static std::size_t checked_extent(int rows, int cols) {
        if (rows < 0 || cols < 0) throw ContractError("matrix dimensions must be non-negative");
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// Elementwise / structural operations. Shape mismatches throw ShapeError.
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix transpose(const Matrix& a);
// a (n x d) plus a single row (1 x d) broadcast down the rows.
Matrix add_row_broadcast(const Matrix& a, const Matrix& row);
Matrix tanh_map(const Matrix& a);
// Scales each row to unit l2 norm; rows with norm < kNormEps pass through.
Matrix l2_normalize_rows(const Matrix& a);
// Row-wise softmax with per-row max subtraction for numeric stability.
Matrix softmax_rows(const Matrix& a);
// log(x + kLogEps), defined for x >= 0 (probabilities).
Matrix log_clamped(const Matrix& a);
Matrix gather_rows(const Matrix& a, const std::vector<int>& indices);
Matrix gather_cols(const Matrix& a, const std::vector<int>& indices);
Matrix vstack(const std::vector<const Matrix*>& parts);
Matrix hstack(const std::vector<const Matrix*>& parts);

// Product kernels. These carry the only loops worth parallelising; both are
// OpenMP-parallel over output rows with a serial inner accumulation, so the
// result is bit-identical for any thread count.
Matrix matmul(const Matrix& a, const Matrix& b);

double sum_all(const Matrix& a);
double trace(const Matrix& a);
int argmax_row(const Matrix& a, int row);  // ties resolve to the lowest index

namespace reference {
// Plain serial implementations kept as oracles for the parallel kernels and
// as the baseline side of the benchmark tool. Never called by the production
// code paths above.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix linear_gram(const Matrix& emb);
}  // namespace reference

}  // namespace fuseshot
