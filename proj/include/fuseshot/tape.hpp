#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fuseshot/matrix.hpp"

namespace fuseshot {

// Handle to a node on a Tape. Only valid for the tape that produced it.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over matrix-valued nodes. Usage: record a forward
// computation through the member ops, call backward() on a 1x1 result, then
// read per-leaf adjoints. A tape is single-threaded by design; the matrix
// kernels it calls may parallelise internally.
//
// Every node's value is checked for finiteness on creation, so a NaN anywhere
// in training surfaces immediately with the op that produced it.
class Tape {
public:
    // Leaf with gradient tracking (parameters). The name is only used in
    // diagnostics.
    Var input(Matrix value, std::string name = {});
    // Leaf without gradient tracking (data, precomputed kernels, quasi-labels).
    Var constant(Matrix value);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var a, double s);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var tanh(Var a);
    Var l2_normalize_rows(Var a);
    Var softmax_rows(Var a);
    Var log_clamped(Var a);
    Var gather_rows(Var a, std::vector<int> indices);
    Var gather_cols(Var a, const std::vector<int>& indices);  // composed from transpose+gather
    Var add_row_broadcast(Var a, Var row);
    Var sum_all(Var a);
    Var mean_all(Var a);
    Var trace(Var a);

    // Seeds the adjoint of `scalar` (must be 1x1) with 1 and propagates to all
    // ancestors. May be called repeatedly; adjoints are reset each time.
    void backward(Var scalar);

    const Matrix& value(Var v) const { return node(v).value; }
    // Adjoint of a node after backward(); zero-shaped matrix if untouched.
    const Matrix& adjoint(Var v) const { return node(v).adjoint; }

    std::size_t node_count() const { return nodes_.size(); }

    // Recomputes every non-leaf value from its parents and compares bitwise
    // with what was recorded. Returns true when the replay is identical;
    // exercised by tests as a determinism check on the kernels.
    bool replay_matches() const;

private:
    enum class Op : std::uint8_t {
        Leaf,
        Constant,
        Add,
        Sub,
        Hadamard,
        Scale,
        MatMul,
        Transpose,
        Tanh,
        L2NormalizeRows,
        SoftmaxRows,
        LogClamped,
        GatherRows,
        AddRowBroadcast,
        SumAll,
        MeanAll,
        Trace,
    };

    struct Node {
        Op op;
        Matrix value;
        Matrix adjoint;
        int a = -1;
        int b = -1;
        double scalar = 0.0;
        std::vector<int> indices;
        std::string name;
    };

    const Node& node(Var v) const;
    Var push(Node n);
    Matrix forward_of(const Node& n) const;
    void accumulate(int id, const Matrix& g);
    static const char* op_name(Op op);

    std::vector<Node> nodes_;
};

}  // namespace fuseshot
