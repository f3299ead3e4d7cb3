#include "fuseshot/tape.hpp"

#include <cmath>
#include <cstring>

namespace fuseshot {

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
        throw ContractError("tape: invalid node handle");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::push(Node n) {
    if (!n.value.is_finite()) {
        throw NumericError("non-finite value at tape node " + std::to_string(nodes_.size()) + " (op " +
                           op_name(n.op) + (n.name.empty() ? std::string() : ", name " + n.name) + ")");
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Matrix value, std::string name) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.name = std::move(name);
    return push(std::move(n));
}

Var Tape::constant(Matrix value) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    Node n;
    n.op = Op::Add;
    n.a = a.id;
    n.b = b.id;
    n.value = fuseshot::add(node(a).value, node(b).value);
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    Node n;
    n.op = Op::Sub;
    n.a = a.id;
    n.b = b.id;
    n.value = fuseshot::sub(node(a).value, node(b).value);
    return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
    Node n;
    n.op = Op::Hadamard;
    n.a = a.id;
    n.b = b.id;
    n.value = fuseshot::hadamard(node(a).value, node(b).value);
    return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
    Node n;
    n.op = Op::Scale;
    n.a = a.id;
    n.scalar = s;
    n.value = fuseshot::scale(node(a).value, s);
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    Node n;
    n.op = Op::MatMul;
    n.a = a.id;
    n.b = b.id;
    n.value = fuseshot::matmul(node(a).value, node(b).value);
    return push(std::move(n));
}

Var Tape::transpose(Var a) {
    Node n;
    n.op = Op::Transpose;
    n.a = a.id;
    n.value = fuseshot::transpose(node(a).value);
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    Node n;
    n.op = Op::Tanh;
    n.a = a.id;
    n.value = tanh_map(node(a).value);
    return push(std::move(n));
}

Var Tape::l2_normalize_rows(Var a) {
    Node n;
    n.op = Op::L2NormalizeRows;
    n.a = a.id;
    n.value = fuseshot::l2_normalize_rows(node(a).value);
    return push(std::move(n));
}

Var Tape::softmax_rows(Var a) {
    Node n;
    n.op = Op::SoftmaxRows;
    n.a = a.id;
    n.value = fuseshot::softmax_rows(node(a).value);
    return push(std::move(n));
}

Var Tape::log_clamped(Var a) {
    Node n;
    n.op = Op::LogClamped;
    n.a = a.id;
    n.value = fuseshot::log_clamped(node(a).value);
    return push(std::move(n));
}

Var Tape::gather_rows(Var a, std::vector<int> indices) {
    Node n;
    n.op = Op::GatherRows;
    n.a = a.id;
    n.value = fuseshot::gather_rows(node(a).value, indices);
    n.indices = std::move(indices);
    return push(std::move(n));
}

Var Tape::gather_cols(Var a, const std::vector<int>& indices) {
    return transpose(gather_rows(transpose(a), indices));
}

Var Tape::add_row_broadcast(Var a, Var row) {
    Node n;
    n.op = Op::AddRowBroadcast;
    n.a = a.id;
    n.b = row.id;
    n.value = fuseshot::add_row_broadcast(node(a).value, node(row).value);
    return push(std::move(n));
}

Var Tape::sum_all(Var a) {
    Node n;
    n.op = Op::SumAll;
    n.a = a.id;
    n.value = Matrix(1, 1, {fuseshot::sum_all(node(a).value)});
    return push(std::move(n));
}

Var Tape::mean_all(Var a) {
    const Matrix& v = node(a).value;
    if (v.size() == 0) throw ContractError("mean_all: empty matrix");
    Node n;
    n.op = Op::MeanAll;
    n.a = a.id;
    n.value = Matrix(1, 1, {fuseshot::sum_all(v) / static_cast<double>(v.size())});
    return push(std::move(n));
}

Var Tape::trace(Var a) {
    Node n;
    n.op = Op::Trace;
    n.a = a.id;
    n.value = Matrix(1, 1, {fuseshot::trace(node(a).value)});
    return push(std::move(n));
}

void Tape::accumulate(int id, const Matrix& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.adjoint.empty()) {
        n.adjoint = g;
    } else {
        n.adjoint = fuseshot::add(n.adjoint, g);
    }
}

void Tape::backward(Var scalar) {
    const Node& top = node(scalar);
    if (top.value.rows() != 1 || top.value.cols() != 1) {
        throw ContractError("backward: node is " + std::to_string(top.value.rows()) + "x" +
                            std::to_string(top.value.cols()) + ", expected 1x1");
    }

    // Mark ancestors of the seed so the sweep skips unrelated nodes.
    std::vector<char> live(nodes_.size(), 0);
    {
        std::vector<int> stack{scalar.id};
        while (!stack.empty()) {
            const int id = stack.back();
            stack.pop_back();
            if (live[static_cast<std::size_t>(id)]) continue;
            live[static_cast<std::size_t>(id)] = 1;
            const Node& n = nodes_[static_cast<std::size_t>(id)];
            if (n.a >= 0) stack.push_back(n.a);
            if (n.b >= 0) stack.push_back(n.b);
        }
    }

    for (Node& n : nodes_) n.adjoint = Matrix();
    accumulate(scalar.id, Matrix(1, 1, {1.0}));

    for (int id = scalar.id; id >= 0; --id) {
        if (!live[static_cast<std::size_t>(id)]) continue;
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.adjoint.empty()) continue;
        const Matrix& g = n.adjoint;
        switch (n.op) {
            case Op::Leaf:
            case Op::Constant:
                break;
            case Op::Add:
                accumulate(n.a, g);
                accumulate(n.b, g);
                break;
            case Op::Sub:
                accumulate(n.a, g);
                accumulate(n.b, fuseshot::scale(g, -1.0));
                break;
            case Op::Hadamard:
                accumulate(n.a, fuseshot::hadamard(g, nodes_[static_cast<std::size_t>(n.b)].value));
                accumulate(n.b, fuseshot::hadamard(g, nodes_[static_cast<std::size_t>(n.a)].value));
                break;
            case Op::Scale:
                accumulate(n.a, fuseshot::scale(g, n.scalar));
                break;
            case Op::MatMul:
                accumulate(n.a, fuseshot::matmul(g, fuseshot::transpose(nodes_[static_cast<std::size_t>(n.b)].value)));
                accumulate(n.b, fuseshot::matmul(fuseshot::transpose(nodes_[static_cast<std::size_t>(n.a)].value), g));
                break;
            case Op::Transpose:
                accumulate(n.a, fuseshot::transpose(g));
                break;
            case Op::Tanh: {
                Matrix d(n.value.rows(), n.value.cols());
                for (std::size_t i = 0; i < d.size(); ++i) {
                    const double y = n.value.data()[i];
                    d.data()[i] = g.data()[i] * (1.0 - y * y);
                }
                accumulate(n.a, d);
                break;
            }
            case Op::L2NormalizeRows: {
                const Matrix& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Matrix d(x.rows(), x.cols());
                for (int i = 0; i < x.rows(); ++i) {
                    double sq = 0.0;
                    for (int j = 0; j < x.cols(); ++j) sq += x(i, j) * x(i, j);
                    const double norm = std::sqrt(sq);
                    if (norm < kNormEps) continue;  // row passed through; gradient blocked
                    double dot = 0.0;
                    for (int j = 0; j < x.cols(); ++j) dot += g(i, j) * n.value(i, j);
                    for (int j = 0; j < x.cols(); ++j) d(i, j) = (g(i, j) - dot * n.value(i, j)) / norm;
                }
                accumulate(n.a, d);
                break;
            }
            case Op::SoftmaxRows: {
                Matrix d(n.value.rows(), n.value.cols());
                for (int i = 0; i < n.value.rows(); ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < n.value.cols(); ++j) dot += g(i, j) * n.value(i, j);
                    for (int j = 0; j < n.value.cols(); ++j) d(i, j) = n.value(i, j) * (g(i, j) - dot);
                }
                accumulate(n.a, d);
                break;
            }
            case Op::LogClamped: {
                const Matrix& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Matrix d(x.rows(), x.cols());
                for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] = g.data()[i] / (x.data()[i] + kLogEps);
                accumulate(n.a, d);
                break;
            }
            case Op::GatherRows: {
                const Matrix& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Matrix d(x.rows(), x.cols());
                for (int i = 0; i < n.value.rows(); ++i) {
                    const int dst = n.indices[static_cast<std::size_t>(i)];
                    for (int j = 0; j < x.cols(); ++j) d(dst, j) += g(i, j);
                }
                accumulate(n.a, d);
                break;
            }
            case Op::AddRowBroadcast: {
                accumulate(n.a, g);
                Matrix d(1, g.cols());
                for (int i = 0; i < g.rows(); ++i) {
                    for (int j = 0; j < g.cols(); ++j) d(0, j) += g(i, j);
                }
                accumulate(n.b, d);
                break;
            }
            case Op::SumAll: {
                const Matrix& x = nodes_[static_cast<std::size_t>(n.a)].value;
                accumulate(n.a, Matrix::constant(x.rows(), x.cols(), g(0, 0)));
                break;
            }
            case Op::MeanAll: {
                const Matrix& x = nodes_[static_cast<std::size_t>(n.a)].value;
                accumulate(n.a, Matrix::constant(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size())));
                break;
            }
            case Op::Trace: {
                const Matrix& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Matrix d(x.rows(), x.cols());
                for (int i = 0; i < x.rows(); ++i) d(i, i) = g(0, 0);
                accumulate(n.a, d);
                break;
            }
        }
    }
}

Matrix Tape::forward_of(const Node& n) const {
    const auto val = [this](int id) -> const Matrix& { return nodes_[static_cast<std::size_t>(id)].value; };
    switch (n.op) {
        case Op::Leaf:
        case Op::Constant:
            return n.value;
        case Op::Add:
            return fuseshot::add(val(n.a), val(n.b));
        case Op::Sub:
            return fuseshot::sub(val(n.a), val(n.b));
        case Op::Hadamard:
            return fuseshot::hadamard(val(n.a), val(n.b));
        case Op::Scale:
            return fuseshot::scale(val(n.a), n.scalar);
        case Op::MatMul:
            return fuseshot::matmul(val(n.a), val(n.b));
        case Op::Transpose:
            return fuseshot::transpose(val(n.a));
        case Op::Tanh:
            return tanh_map(val(n.a));
        case Op::L2NormalizeRows:
            return fuseshot::l2_normalize_rows(val(n.a));
        case Op::SoftmaxRows:
            return fuseshot::softmax_rows(val(n.a));
        case Op::LogClamped:
            return fuseshot::log_clamped(val(n.a));
        case Op::GatherRows:
            return fuseshot::gather_rows(val(n.a), n.indices);
        case Op::AddRowBroadcast:
            return fuseshot::add_row_broadcast(val(n.a), val(n.b));
        case Op::SumAll:
            return Matrix(1, 1, {fuseshot::sum_all(val(n.a))});
        case Op::MeanAll:
            return Matrix(1, 1, {fuseshot::sum_all(val(n.a)) / static_cast<double>(val(n.a).size())});
        case Op::Trace:
            return Matrix(1, 1, {fuseshot::trace(val(n.a))});
    }
    throw ContractError("tape: unknown op");
}

bool Tape::replay_matches() const {
    for (const Node& n : nodes_) {
        const Matrix again = forward_of(n);
        if (!again.same_shape(n.value)) return false;
        if (std::memcmp(again.data(), n.value.data(), again.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

const char* Tape::op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Constant: return "constant";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Hadamard: return "hadamard";
        case Op::Scale: return "scale";
        case Op::MatMul: return "matmul";
        case Op::Transpose: return "transpose";
        case Op::Tanh: return "tanh";
        case Op::L2NormalizeRows: return "l2_normalize_rows";
        case Op::SoftmaxRows: return "softmax_rows";
        case Op::LogClamped: return "log_clamped";
        case Op::GatherRows: return "gather_rows";
        case Op::AddRowBroadcast: return "add_row_broadcast";
        case Op::SumAll: return "sum_all";
        case Op::MeanAll: return "mean_all";
        case Op::Trace: return "trace";
    }
    return "?";
}

}  // namespace fuseshot
