#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fuseshot/hsic.hpp"
#include "fuseshot/rng.hpp"

using namespace fuseshot;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

// Best-of-reps wall time in milliseconds.
double time_ms(const std::function<void()>& fn, int reps) {
    double best = 0.0;
    for (int r = 0; r < reps; ++r) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
        if (r == 0 || elapsed.count() < best) best = elapsed.count();
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms, double diff) {
    std::printf("%-22s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   max |diff| %.3e\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms, diff);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both paths run serially\n");
#endif
    Rng rng(42);

    for (const int n : {128, 256, 384}) {
        const Matrix a = random_matrix(n, n, rng);
        const Matrix b = random_matrix(n, n, rng);
        Matrix out_serial, out_parallel;
        const double serial = time_ms([&] { out_serial = reference::matmul(a, b); }, 3);
        const double parallel = time_ms([&] { out_parallel = matmul(a, b); }, 3);
        char name[64];
        std::snprintf(name, sizeof(name), "matmul %dx%d", n, n);
        report(name, serial, parallel, max_abs_diff(out_serial, out_parallel));
    }

    for (const int n : {256, 512}) {
        const Matrix emb = random_matrix(n, 64, rng);
        Matrix out_serial, out_parallel;
        const double serial = time_ms([&] { out_serial = reference::linear_gram(emb); }, 3);
        const double parallel = time_ms([&] { out_parallel = linear_gram(emb); }, 3);
        char name[64];
        std::snprintf(name, sizeof(name), "linear_gram %dx64", n);
        report(name, serial, parallel, max_abs_diff(out_serial, out_parallel));
    }

    for (const int n : {128, 256}) {
        const Matrix ga = random_matrix(n, 32, rng);
        const Matrix gb = random_matrix(n, 32, rng);
        const Matrix kg = linear_gram(ga);
        const Matrix kr = linear_gram(gb);
        double out_serial = 0.0, out_parallel = 0.0;
        const double serial = time_ms([&] { out_serial = reference::hsic(kg, kr); }, 3);
        const double parallel = time_ms([&] { out_parallel = hsic(kg, kr); }, 3);
        char name[64];
        std::snprintf(name, sizeof(name), "hsic n=%d", n);
        report(name, serial, parallel, std::abs(out_serial - out_parallel));
    }
    return 0;
}
