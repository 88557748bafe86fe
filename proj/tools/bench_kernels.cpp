// Times the serial kernel variants against the OpenMP ones and checks that
// both produce bitwise identical output. Usage: bench_kernels [n] [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "encscan/kernels.hpp"
#include "encscan/rng.hpp"

using namespace encscan;
using clock_type = std::chrono::steady_clock;

namespace {

double time_of(void (*fn)(const float*, int64_t, int64_t, const float*, int64_t, float*),
               const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c,
               int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = clock_type::now();
        fn(a, n, k, b, m, c);
        double s = std::chrono::duration<double>(clock_type::now() - t0).count();
        if (s < best) best = s;
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    int64_t n = argc > 1 ? std::atoll(argv[1]) : 256;
    int reps = argc > 2 ? std::atoi(argv[2]) : 5;
    if (n < 8 || reps < 1) {
        std::fprintf(stderr, "usage: bench_kernels [n >= 8] [reps >= 1]\n");
        return 2;
    }
#ifdef _OPENMP
    std::printf("openmp enabled, max threads = %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp; both variants run serial code\n");
#endif
    std::printf("square problems of size n = %lld, best of %d reps\n\n", (long long)n, reps);

    RngStream rng(12345, 0);
    std::vector<float> a(static_cast<size_t>(n * n)), b(static_cast<size_t>(n * n));
    for (auto& v : a) v = rng.next_float() - 0.5f;
    for (auto& v : b) v = rng.next_float() - 0.5f;
    std::vector<float> c_serial(static_cast<size_t>(n * n)), c_omp(c_serial.size());
    std::vector<double> d_serial(static_cast<size_t>(n * n)), d_omp(d_serial.size());

    struct Row {
        const char* name;
        void (*serial)(const float*, int64_t, int64_t, const float*, int64_t, float*);
        void (*omp)(const float*, int64_t, int64_t, const float*, int64_t, float*);
    };
    const Row rows[] = {
        {"gemm_nt", kern::gemm_nt_serial, kern::gemm_nt_omp},
        {"gemm_nn", kern::gemm_nn_serial, kern::gemm_nn_omp},
        {"gemm_tn", kern::gemm_tn_serial, kern::gemm_tn_omp},
    };

    std::printf("%-16s %12s %12s %9s %8s\n", "kernel", "serial (s)", "openmp (s)", "speedup",
                "bitwise");
    bool all_equal = true;
    for (const Row& row : rows) {
        double ts = time_of(row.serial, a.data(), n, n, b.data(), n, c_serial.data(), reps);
        double tp = time_of(row.omp, a.data(), n, n, b.data(), n, c_omp.data(), reps);
        bool eq = std::memcmp(c_serial.data(), c_omp.data(), c_serial.size() * sizeof(float)) == 0;
        all_equal = all_equal && eq;
        std::printf("%-16s %12.6f %12.6f %8.2fx %8s\n", row.name, ts, tp, ts / tp,
                    eq ? "equal" : "DIFFER");
    }
    {
        double ts = 1e300, tp = 1e300;
        for (int r = 0; r < reps; ++r) {
            auto t0 = clock_type::now();
            kern::pairwise_sqdist_serial(a.data(), n, b.data(), n, n, d_serial.data());
            ts = std::min(ts, std::chrono::duration<double>(clock_type::now() - t0).count());
            t0 = clock_type::now();
            kern::pairwise_sqdist_omp(a.data(), n, b.data(), n, n, d_omp.data());
            tp = std::min(tp, std::chrono::duration<double>(clock_type::now() - t0).count());
        }
        bool eq =
            std::memcmp(d_serial.data(), d_omp.data(), d_serial.size() * sizeof(double)) == 0;
        all_equal = all_equal && eq;
        std::printf("%-16s %12.6f %12.6f %8.2fx %8s\n", "pairwise_sqdist", ts, tp, ts / tp,
                    eq ? "equal" : "DIFFER");
    }
    if (!all_equal) {
        std::printf("\nFAIL: serial and openmp variants disagree\n");
        return 1;
    }
    std::printf("\nall kernels bitwise equal across variants\n");
    return 0;
}
