#pragma once

#include <cstdint>

namespace encscan::kern {

// Every kernel exists in a serial and an OpenMP variant. Parallel loops are
// split over independent output elements and each element is reduced in a
// fixed serial order, so both variants produce bitwise identical results for
// any thread count. The serial variants are the reference the tests compare
// against; bench_kernels times the two side by side.
enum class ExecMode { serial, openmp };

ExecMode default_mode();           // openmp, unless ENCSCAN_SERIAL=1 in the environment
void set_default_mode(ExecMode m);

// C[n x m] = A[n x k] * B[m x k]^T   (rows dotted with rows)
void gemm_nt_serial(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c);
void gemm_nt_omp(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c);
void gemm_nt(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c);

// C[n x m] = A[n x k] * B[k x m]
void gemm_nn_serial(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c);
void gemm_nn_omp(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c);
void gemm_nn(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c);

// C[k x m] = A[n x k]^T * B[n x m]
void gemm_tn_serial(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c);
void gemm_tn_omp(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c);
void gemm_tn(const float* a, int64_t n, int64_t k, const float* b, int64_t m, float* c);

// D[n x m] = squared Euclidean distance between rows of X[n x d] and Y[m x d]
void pairwise_sqdist_serial(const float* x, int64_t n, const float* y, int64_t m, int64_t d, double* out);
void pairwise_sqdist_omp(const float* x, int64_t n, const float* y, int64_t m, int64_t d, double* out);
void pairwise_sqdist(const float* x, int64_t n, const float* y, int64_t m, int64_t d, double* out);

}  // namespace encscan::kern
