#include "relabel/kernels.hpp"

#include <algorithm>
#include <cmath>

// Scalar reference kernels. These define the semantics; SIMD variants must
// match them up to floating-point reassociation.

namespace relabel::kernels {
namespace {

void gemm_nn_scalar(std::size_t m, std::size_t k, std::size_t n,
                    const double* a, const double* b, double* c) {
    std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = a[i * k + l];
            const double* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt_scalar(std::size_t m, std::size_t k, std::size_t n,
                    const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            c[i * n + j] = acc;
        }
    }
}

void gemm_tn_scalar(std::size_t m, std::size_t k, std::size_t n,
                    const double* a, const double* b, double* c) {
    std::fill(c, c + m * n, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void add_bias_rows_scalar(std::size_t rows, std::size_t cols, const double* bias, double* x) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = x + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += bias[j];
    }
}

void relu_scalar(std::size_t n, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(std::size_t n, const double* x, const double* dy, double* dx) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void adam_step_scalar(std::size_t n, double* param, const double* grad, double* m, double* v,
                      double lr, double beta1, double beta2, double eps,
                      double bias1, double bias2) {
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend backend{
        "scalar",
        gemm_nn_scalar,
        gemm_nt_scalar,
        gemm_tn_scalar,
        add_bias_rows_scalar,
        relu_scalar,
        relu_backward_scalar,
        adam_step_scalar,
    };
    return backend;
}

}  // namespace relabel::kernels
