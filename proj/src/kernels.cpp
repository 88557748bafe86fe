#include "encscan/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace encscan::kern {

namespace {

std::atomic<ExecMode> g_mode = [] {
    const char* env = std::getenv("ENCSCAN_SERIAL");
    return (env && env[0] == '1') ? ExecMode::serial : ExecMode::openmp;
}();

inline double dot_f64(const float* a, const float* b, int64_t k) {
    double acc = 0.0;
    for (int64_t i = 0; i < k; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

inline double sqdist_f64(const float* a, const float* b, int64_t d) {
    double acc = 0.0;
    for (int64_t i = 0; i < d; ++i) {
        double t = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += t * t;
    }
    return acc;
}

}  // namespace

ExecMode default_mode() { return g_mode.load(std::memory_order_relaxed); }
void set_default_mode(ExecMode m) { g_mode.store(m, std::memory_order_relaxed); }

// ---- A * B^T ----

void gemm_nt_serial(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c) {
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j)
            c[i * m + j] = static_cast<float>(dot_f64(a + i * k, b + j * k, k));
}

void gemm_nt_omp(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j)
            c[i * m + j] = static_cast<float>(dot_f64(a + i * k, b + j * k, k));
}

void gemm_nt(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c) {
    default_mode() == ExecMode::serial ? gemm_nt_serial(a, n, k, b, m, c)
                                       : gemm_nt_omp(a, n, k, b, m, c);
}

// ---- A * B ----

void gemm_nn_serial(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c) {
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < k; ++t)
                acc += static_cast<double>(a[i * k + t]) * static_cast<double>(b[t * m + j]);
            c[i * m + j] = static_cast<float>(acc);
        }
}

void gemm_nn_omp(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < k; ++t)
                acc += static_cast<double>(a[i * k + t]) * static_cast<double>(b[t * m + j]);
            c[i * m + j] = static_cast<float>(acc);
        }
}

void gemm_nn(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c) {
    default_mode() == ExecMode::serial ? gemm_nn_serial(a, n, k, b, m, c)
                                       : gemm_nn_omp(a, n, k, b, m, c);
}

// ---- A^T * B ----

void gemm_tn_serial(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c) {
    for (int64_t i = 0; i < k; ++i)
        for (int64_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < n; ++t)
                acc += static_cast<double>(a[t * k + i]) * static_cast<double>(b[t * m + j]);
            c[i * m + j] = static_cast<float>(acc);
        }
}

void gemm_tn_omp(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < k; ++i)
        for (int64_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < n; ++t)
                acc += static_cast<double>(a[t * k + i]) * static_cast<double>(b[t * m + j]);
            c[i * m + j] = static_cast<float>(acc);
        }
}

void gemm_tn(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c) {
    default_mode() == ExecMode::serial ? gemm_tn_serial(a, n, k, b, m, c)
                                       : gemm_tn_omp(a, n, k, b, m, c);
}

// ---- pairwise squared distances ----

void pairwise_sqdist_serial(const float* x, int64_t n, const float* y, int64_t m, int64_t d, double* out) {
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j)
            out[i * m + j] = sqdist_f64(x + i * d, y + j * d, d);
}

void pairwise_sqdist_omp(const float* x, int64_t n, const float* y, int64_t m, int64_t d, double* out) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j)
            out[i * m + j] = sqdist_f64(x + i * d, y + j * d, d);
}

void pairwise_sqdist(const float* x, int64_t n, const float* y, int64_t m, int64_t d, double* out) {
    default_mode() == ExecMode::serial ? pairwise_sqdist_serial(x, n, y, m, d, out)
                                       : pairwise_sqdist_omp(x, n, y, m, d, out);
}

}  // namespace encscan::kern
