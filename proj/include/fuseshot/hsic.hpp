#pragma once

#include <vector>

#include "fuseshot/tape.hpp"

namespace fuseshot {

// Gram matrix of the inner products between rows of emb: K = emb emb^T.
// With l2-normalized rows this is the cosine kernel with a unit diagonal.
Matrix linear_gram(const Matrix& emb);

// H = I - (1/n) 11^T, n >= 2. Symmetric, idempotent, rows sum to zero.
Matrix centering_matrix(int n);

// Empirical dependence score between two n x n kernels over the same samples:
//   hsic(Kg, Kr) = tr(H Kg H Kr) / (n - 1)^2.
// Symmetric in its arguments; invariant to adding c*11^T to either side.
double hsic(const Matrix& kg, const Matrix& kr);

// Uniform average of M kernels of identical shape (equal source weights).
Matrix average_kernels(const std::vector<Matrix>& kernels);

// Tape counterparts, differentiable in the kernel entries.
Var linear_gram(Tape& tape, Var emb);
Var hsic_node(Tape& tape, Var kg, Var kr);
Var average_kernels(Tape& tape, const std::vector<Var>& kernels);

namespace reference {
// Oracle route: builds H with explicit loops, multiplies the four matrices
// with the serial reference matmul and sums the diagonal by hand. Shares no
// code with hsic() above.
double hsic(const Matrix& kg, const Matrix& kr);
}  // namespace reference

}  // namespace fuseshot
