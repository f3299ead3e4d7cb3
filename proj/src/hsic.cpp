#include "fuseshot/hsic.hpp"

namespace fuseshot {

namespace {

void require_kernel_pair(const Matrix& kg, const Matrix& kr) {
    if (kg.rows() != kg.cols()) throw ShapeError("hsic: first kernel is not square");
    if (kr.rows() != kr.cols()) throw ShapeError("hsic: second kernel is not square");
    if (kg.rows() != kr.rows()) {
        throw ShapeError("hsic: kernel sizes differ (" + std::to_string(kg.rows()) + " vs " +
                         std::to_string(kr.rows()) + ")");
    }
    if (kg.rows() < 2) throw ContractError("hsic: needs at least 2 samples");
}

}  // namespace

Matrix linear_gram(const Matrix& emb) {
    return matmul(emb, transpose(emb));
}

Matrix centering_matrix(int n) {
    if (n < 2) throw ContractError("centering_matrix: n must be >= 2, got " + std::to_string(n));
    Matrix h = Matrix::constant(n, n, -1.0 / n);
    for (int i = 0; i < n; ++i) h(i, i) += 1.0;
    return h;
}

double hsic(const Matrix& kg, const Matrix& kr) {
    require_kernel_pair(kg, kr);
    const int n = kg.rows();
    const Matrix h = centering_matrix(n);
    const Matrix prod = matmul(matmul(matmul(h, kg), h), kr);
    const double denom = static_cast<double>(n - 1) * static_cast<double>(n - 1);
    return trace(prod) / denom;
}

Matrix average_kernels(const std::vector<Matrix>& kernels) {
    if (kernels.empty()) throw ContractError("average_kernels: empty kernel list");
    Matrix acc = kernels.front();
    for (std::size_t i = 1; i < kernels.size(); ++i) acc = add(acc, kernels[i]);
    return scale(acc, 1.0 / static_cast<double>(kernels.size()));
}

Var linear_gram(Tape& tape, Var emb) {
    return tape.matmul(emb, tape.transpose(emb));
}

Var hsic_node(Tape& tape, Var kg, Var kr) {
    require_kernel_pair(tape.value(kg), tape.value(kr));
    const int n = tape.value(kg).rows();
    const Var h = tape.constant(centering_matrix(n));
    const Var prod = tape.matmul(tape.matmul(tape.matmul(h, kg), h), kr);
    const double denom = static_cast<double>(n - 1) * static_cast<double>(n - 1);
    return tape.scale(tape.trace(prod), 1.0 / denom);
}

Var average_kernels(Tape& tape, const std::vector<Var>& kernels) {
    if (kernels.empty()) throw ContractError("average_kernels: empty kernel list");
    Var acc = kernels.front();
    for (std::size_t i = 1; i < kernels.size(); ++i) acc = tape.add(acc, kernels[i]);
    return tape.scale(acc, 1.0 / static_cast<double>(kernels.size()));
}

namespace reference {

double hsic(const Matrix& kg, const Matrix& kr) {
    require_kernel_pair(kg, kr);
    const int n = kg.rows();
    Matrix h(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) h(i, j) = (i == j ? 1.0 : 0.0) - 1.0 / n;
    }
    const Matrix prod = reference::matmul(reference::matmul(reference::matmul(h, kg), h), kr);
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += prod(i, i);
    return tr / (static_cast<double>(n - 1) * static_cast<double>(n - 1));
}

}  // namespace reference

}  // namespace fuseshot
