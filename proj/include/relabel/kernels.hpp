#pragma once

#include <cstddef>

namespace relabel::kernels {

// Dense numeric kernels used by the classifier's training and inference
// loops. Every operation ships as a scalar reference implementation plus an
// AVX2 variant (when built on x86-64); the active backend is selected once at
// runtime from CPU capabilities. Scalar and SIMD variants must agree within
// floating-point reassociation error and are equivalence-tested.
//
// All matrices are dense row-major doubles.
struct Backend {
    const char* name;

    // c[m x n] = a[m x k] * b[k x n]
    void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t n,
                    const double* a, const double* b, double* c);
    // c[m x n] = a[m x k] * b[n x k]^T
    void (*gemm_nt)(std::size_t m, std::size_t k, std::size_t n,
                    const double* a, const double* b, double* c);
    // c[m x n] = a[k x m]^T * b[k x n]
    void (*gemm_tn)(std::size_t m, std::size_t k, std::size_t n,
                    const double* a, const double* b, double* c);

    // x[r x c] += bias[c] broadcast over rows
    void (*add_bias_rows)(std::size_t rows, std::size_t cols, const double* bias, double* x);

    // y[i] = max(x[i], 0)
    void (*relu)(std::size_t n, const double* x, double* y);
    // dx[i] = x[i] > 0 ? dy[i] : 0
    void (*relu_backward)(std::size_t n, const double* x, const double* dy, double* dx);

    // Bias-corrected Adam update. bias1 = 1 - beta1^t, bias2 = 1 - beta2^t
    // are precomputed by the caller.
    void (*adam_step)(std::size_t n, double* param, const double* grad, double* m, double* v,
                      double lr, double beta1, double beta2, double eps,
                      double bias1, double bias2);
};

const Backend& scalar_backend();

// AVX2 backend, or nullptr when not compiled in or not supported by the CPU.
const Backend* avx2_backend();

// Backend in use: AVX2 when available unless forced to scalar (set_force_scalar
// or RELABEL_FORCE_SCALAR=1 in the environment).
const Backend& active();

void set_force_scalar(bool force);

bool avx2_compiled();
bool avx2_runtime_supported();

}  // namespace relabel::kernels
