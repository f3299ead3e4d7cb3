#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "fuseshot/rng.hpp"
#include "fuseshot/tape.hpp"

using namespace fuseshot;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
    }
    return m;
}

// Central finite differences of a scalar-valued graph against the adjoint the
// tape reports for its single input. `f` rebuilds the graph from scratch so
// each evaluation is independent.
void check_gradient(const Matrix& x0, const std::function<Var(Tape&, Var)>& f, double tol = 1e-7) {
    Tape tape;
    const Var x = tape.input(x0, "x");
    const Var y = f(tape, x);
    REQUIRE(tape.value(y).rows() == 1);
    REQUIRE(tape.value(y).cols() == 1);
    tape.backward(y);
    const Matrix grad = tape.adjoint(x);
    REQUIRE(grad.same_shape(x0));

    const double h = 1e-6;
    for (int i = 0; i < x0.rows(); ++i) {
        for (int j = 0; j < x0.cols(); ++j) {
            Matrix plus = x0, minus = x0;
            plus(i, j) += h;
            minus(i, j) -= h;
            Tape tp, tm;
            const double fp = tp.value(f(tp, tp.input(plus)))(0, 0);
            const double fm = tm.value(f(tm, tm.input(minus)))(0, 0);
            const double fd = (fp - fm) / (2.0 * h);
            const double rel = std::abs(fd - grad(i, j)) / std::max({std::abs(fd), std::abs(grad(i, j)), 1.0});
            CHECK(rel < tol);
        }
    }
}

}  // namespace

TEST_CASE("forward values match the plain matrix ops") {
    Rng rng(2);
    const Matrix a0 = random_matrix(3, 4, rng);
    const Matrix b0 = random_matrix(4, 2, rng);

    Tape tape;
    const Var a = tape.input(a0, "a");
    const Var b = tape.input(b0, "b");
    const Var c = tape.matmul(a, b);
    const Matrix expected = matmul(a0, b0);
    for (int i = 0; i < expected.rows(); ++i) {
        for (int j = 0; j < expected.cols(); ++j) CHECK(tape.value(c)(i, j) == expected(i, j));
    }
    CHECK(tape.node_count() == 3);
}

TEST_CASE("backward requires a scalar") {
    Tape tape;
    const Var a = tape.input(Matrix::constant(2, 2, 1.0));
    CHECK_THROWS_AS(tape.backward(a), ContractError);
}

TEST_CASE("sum and mean adjoints are constant fields") {
    Tape tape;
    const Var a = tape.input(Matrix::constant(2, 3, 5.0));
    tape.backward(tape.sum_all(a));
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 3; ++j) CHECK(tape.adjoint(a)(i, j) == 1.0);
    }
    tape.backward(tape.mean_all(a));
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 3; ++j) CHECK(tape.adjoint(a)(i, j) == doctest::Approx(1.0 / 6.0));
    }
}

TEST_CASE("adjoints accumulate across reuse of a node") {
    // y = sum(x) + sum(x) => dy/dx = 2 everywhere
    Tape tape;
    const Var x = tape.input(Matrix::constant(2, 2, 3.0));
    const Var s = tape.sum_all(x);
    tape.backward(tape.add(s, s));
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) CHECK(tape.adjoint(x)(i, j) == 2.0);
    }
}

TEST_CASE("gradients match finite differences per op") {
    Rng rng(9);
    const Matrix x34 = random_matrix(3, 4, rng);
    const Matrix x33 = random_matrix(3, 3, rng);

    SUBCASE("add/sub/scale chain") {
        check_gradient(x34, [](Tape& t, Var x) {
            const Var y = t.scale(t.sub(t.add(x, x), t.scale(x, 0.25)), -1.5);
            return t.sum_all(y);
        });
    }
    SUBCASE("hadamard with a constant") {
        Rng r2(10);
        const Matrix w = random_matrix(3, 4, r2);
        check_gradient(x34, [&w](Tape& t, Var x) { return t.sum_all(t.hadamard(x, t.constant(w))); });
    }
    SUBCASE("matmul both sides") {
        Rng r2(11);
        const Matrix w = random_matrix(4, 2, r2);
        check_gradient(x34, [&w](Tape& t, Var x) { return t.sum_all(t.matmul(x, t.constant(w))); });
        check_gradient(w, [&](Tape& t, Var x) { return t.sum_all(t.matmul(t.constant(x34), x)); });
    }
    SUBCASE("transpose") {
        check_gradient(x34, [](Tape& t, Var x) { return t.mean_all(t.transpose(x)); });
    }
    SUBCASE("tanh") {
        check_gradient(x34, [](Tape& t, Var x) { return t.sum_all(t.tanh(x)); });
    }
    SUBCASE("l2_normalize_rows") {
        // weight the entries so the objective is not norm-invariant by construction
        Rng r2(12);
        const Matrix w = random_matrix(3, 4, r2);
        check_gradient(x34, [&w](Tape& t, Var x) {
            return t.sum_all(t.hadamard(t.l2_normalize_rows(x), t.constant(w)));
        });
    }
    SUBCASE("softmax_rows") {
        Rng r2(13);
        const Matrix w = random_matrix(3, 4, r2);
        check_gradient(x34, [&w](Tape& t, Var x) {
            return t.sum_all(t.hadamard(t.softmax_rows(x), t.constant(w)));
        });
    }
    SUBCASE("log_clamped") {
        // keep inputs positive so the clamp is inactive and smooth
        Matrix pos = x34;
        for (std::size_t i = 0; i < pos.size(); ++i) pos.data()[i] = std::abs(pos.data()[i]) + 0.5;
        check_gradient(pos, [](Tape& t, Var x) { return t.sum_all(t.log_clamped(x)); });
    }
    SUBCASE("gather_rows with repeats") {
        check_gradient(x34, [](Tape& t, Var x) {
            return t.sum_all(t.gather_rows(x, {2, 0, 2, 1}));
        });
    }
    SUBCASE("gather_cols") {
        check_gradient(x34, [](Tape& t, Var x) { return t.sum_all(t.gather_cols(x, {3, 1, 3})); });
    }
    SUBCASE("add_row_broadcast both arguments") {
        Rng r2(14);
        const Matrix row = random_matrix(1, 4, r2);
        check_gradient(x34, [&row](Tape& t, Var x) {
            return t.sum_all(t.tanh(t.add_row_broadcast(x, t.constant(row))));
        });
        check_gradient(row, [&](Tape& t, Var x) {
            return t.sum_all(t.tanh(t.add_row_broadcast(t.constant(x34), x)));
        });
    }
    SUBCASE("trace") {
        check_gradient(x33, [](Tape& t, Var x) { return t.trace(t.matmul(x, x)); });
    }
}

TEST_CASE("gather_rows adjoint scatters with accumulation") {
    Tape tape;
    const Var x = tape.input(Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
    tape.backward(tape.sum_all(tape.gather_rows(x, {0, 0, 1})));
    CHECK(tape.adjoint(x)(0, 0) == 2.0);  // row 0 gathered twice
    CHECK(tape.adjoint(x)(1, 0) == 1.0);
}

TEST_CASE("backward resets adjoints between calls") {
    Tape tape;
    const Var x = tape.input(Matrix::constant(2, 2, 1.0));
    const Var y = tape.sum_all(x);
    tape.backward(y);
    tape.backward(y);
    CHECK(tape.adjoint(x)(0, 0) == 1.0);  // not 2.0: the second call starts clean
}

TEST_CASE("non-finite values are rejected with the op named") {
    Tape tape;
    Matrix bad = Matrix::constant(2, 2, 1.0);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(tape.input(bad, "weights"), NumericError);

    const Var x = tape.input(Matrix::constant(1, 1, 1e308));
    CHECK_THROWS_AS(tape.scale(x, 1e10), NumericError);  // overflow to inf

    // negative input drives log(x + eps) to NaN
    const Var neg = tape.input(Matrix::constant(1, 1, -5.0));
    CHECK_THROWS_AS(tape.log_clamped(neg), NumericError);
}

TEST_CASE("replay reproduces every recorded value bitwise") {
    Rng rng(21);
    Tape tape;
    const Var a = tape.input(random_matrix(6, 5, rng));
    const Var b = tape.input(random_matrix(5, 6, rng));
    const Var c = tape.softmax_rows(tape.matmul(a, b));
    const Var d = tape.l2_normalize_rows(tape.tanh(tape.gather_rows(c, {0, 3, 3})));
    (void)tape.mean_all(tape.log_clamped(d));
    CHECK(tape.replay_matches());
}
