#include "fuseshot/matrix.hpp"

#include <cmath>
#include <string>

namespace fuseshot {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
    }
}

// Work threshold below which the OpenMP kernels stay serial; spawning a team
// for a 5x4 product costs more than the product.
constexpr long kParallelWork = 1 << 15;

}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Matrix m(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) throw ShapeError("from_rows: ragged row " + std::to_string(i));
        int j = 0;
        for (const double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

bool Matrix::is_finite() const {
    for (const double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * s;
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    }
    return out;
}

Matrix add_row_broadcast(const Matrix& a, const Matrix& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeError("add_row_broadcast: " + shape_str(a) + " vs " + shape_str(row));
    }
    Matrix out(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + row(0, j);
    }
    return out;
}

Matrix tanh_map(const Matrix& a) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = std::tanh(a.data()[i]);
    return out;
}

Matrix l2_normalize_rows(const Matrix& a) {
    Matrix out(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i) {
        double sq = 0.0;
        for (int j = 0; j < a.cols(); ++j) sq += a(i, j) * a(i, j);
        const double norm = std::sqrt(sq);
        const double inv = norm < kNormEps ? 1.0 : 1.0 / norm;
        for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) * inv;
    }
    return out;
}

Matrix softmax_rows(const Matrix& a) {
    if (a.cols() == 0) throw ContractError("softmax_rows: empty rows");
    Matrix out(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i) {
        double mx = a(i, 0);
        for (int j = 1; j < a.cols(); ++j) mx = std::max(mx, a(i, j));
        double sum = 0.0;
        for (int j = 0; j < a.cols(); ++j) {
            const double e = std::exp(a(i, j) - mx);
            out(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < a.cols(); ++j) out(i, j) /= sum;
    }
    return out;
}

Matrix log_clamped(const Matrix& a) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = std::log(a.data()[i] + kLogEps);
    return out;
}

Matrix gather_rows(const Matrix& a, const std::vector<int>& indices) {
    Matrix out(static_cast<int>(indices.size()), a.cols());
    for (int i = 0; i < out.rows(); ++i) {
        const int src = indices[static_cast<std::size_t>(i)];
        if (src < 0 || src >= a.rows()) {
            throw ContractError("gather_rows: index " + std::to_string(src) + " out of range [0," +
                                std::to_string(a.rows()) + ")");
        }
        for (int j = 0; j < a.cols(); ++j) out(i, j) = a(src, j);
    }
    return out;
}

Matrix gather_cols(const Matrix& a, const std::vector<int>& indices) {
    Matrix out(a.rows(), static_cast<int>(indices.size()));
    for (int j = 0; j < out.cols(); ++j) {
        const int src = indices[static_cast<std::size_t>(j)];
        if (src < 0 || src >= a.cols()) {
            throw ContractError("gather_cols: index " + std::to_string(src) + " out of range [0," +
                                std::to_string(a.cols()) + ")");
        }
        for (int i = 0; i < a.rows(); ++i) out(i, j) = a(i, src);
    }
    return out;
}

Matrix vstack(const std::vector<const Matrix*>& parts) {
    if (parts.empty()) throw ContractError("vstack: empty part list");
    const int cols = parts.front()->cols();
    int rows = 0;
    for (const Matrix* p : parts) {
        if (p->cols() != cols) throw ShapeError("vstack: column mismatch");
        rows += p->rows();
    }
    Matrix out(rows, cols);
    int at = 0;
    for (const Matrix* p : parts) {
        for (int i = 0; i < p->rows(); ++i, ++at) {
            for (int j = 0; j < cols; ++j) out(at, j) = (*p)(i, j);
        }
    }
    return out;
}

Matrix hstack(const std::vector<const Matrix*>& parts) {
    if (parts.empty()) throw ContractError("hstack: empty part list");
    const int rows = parts.front()->rows();
    int cols = 0;
    for (const Matrix* p : parts) {
        if (p->rows() != rows) throw ShapeError("hstack: row mismatch");
        cols += p->cols();
    }
    Matrix out(rows, cols);
    int at = 0;
    for (const Matrix* p : parts) {
        for (int j = 0; j < p->cols(); ++j, ++at) {
            for (int i = 0; i < rows; ++i) out(i, at) = (*p)(i, j);
        }
    }
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b));
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Matrix out(m, n);
    const long work = static_cast<long>(m) * n * k;
#pragma omp parallel for schedule(static) if (work >= kParallelWork)
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a(i, p) * b(p, j);
            out(i, j) = acc;
        }
    }
    return out;
}

double sum_all(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i];
    return s;
}

double trace(const Matrix& a) {
    if (a.rows() != a.cols()) throw ContractError("trace: matrix is " + shape_str(a) + ", not square");
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) s += a(i, i);
    return s;
}

int argmax_row(const Matrix& a, int row) {
    if (row < 0 || row >= a.rows() || a.cols() == 0) throw ContractError("argmax_row: bad row/shape");
    int best = 0;
    for (int j = 1; j < a.cols(); ++j) {
        if (a(row, j) > a(row, best)) best = j;
    }
    return best;
}

namespace reference {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("reference::matmul: inner dimension mismatch");
    Matrix out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (int p = 0; p < a.cols(); ++p) acc += a(i, p) * b(p, j);
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix linear_gram(const Matrix& emb) {
    Matrix out(emb.rows(), emb.rows());
    for (int i = 0; i < emb.rows(); ++i) {
        for (int j = 0; j < emb.rows(); ++j) {
            double acc = 0.0;
            for (int p = 0; p < emb.cols(); ++p) acc += emb(i, p) * emb(j, p);
            out(i, j) = acc;
        }
    }
    return out;
}

}  // namespace reference

}  // namespace fuseshot
