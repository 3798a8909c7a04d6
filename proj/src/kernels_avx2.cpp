#include "relabel/kernels.hpp"

// AVX2 + FMA kernel variants. Compiled only on x86-64 with -mavx2 -mfma;
// selection against the CPU happens in kernels_dispatch.cpp.

#include <algorithm>
#include <cmath>
#include <immintrin.h>

namespace relabel::kernels {
namespace {

void gemm_nn_avx2(std::size_t m, std::size_t k, std::size_t n,
                  const double* a, const double* b, double* c) {
    std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = a[i * k + l];
            const __m256d avv = _mm256_set1_pd(av);
            const double* brow = b + l * n;
            std::size_t j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256d c0 = _mm256_loadu_pd(crow + j);
                __m256d c1 = _mm256_loadu_pd(crow + j + 4);
                c0 = _mm256_fmadd_pd(avv, _mm256_loadu_pd(brow + j), c0);
                c1 = _mm256_fmadd_pd(avv, _mm256_loadu_pd(brow + j + 4), c1);
                _mm256_storeu_pd(crow + j, c0);
                _mm256_storeu_pd(crow + j + 4, c1);
            }
            for (; j + 4 <= n; j += 4) {
                __m256d c0 = _mm256_loadu_pd(crow + j);
                c0 = _mm256_fmadd_pd(avv, _mm256_loadu_pd(brow + j), c0);
                _mm256_storeu_pd(crow + j, c0);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void gemm_nt_avx2(std::size_t m, std::size_t k, std::size_t n,
                  const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            __m256d acc = _mm256_setzero_pd();
            std::size_t l = 0;
            for (; l + 4 <= k; l += 4)
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + l), _mm256_loadu_pd(brow + l), acc);
            double sum = hsum(acc);
            for (; l < k; ++l) sum += arow[l] * brow[l];
            c[i * n + j] = sum;
        }
    }
}

void gemm_tn_avx2(std::size_t m, std::size_t k, std::size_t n,
                  const double* a, const double* b, double* c) {
    std::fill(c, c + m * n, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            const __m256d avv = _mm256_set1_pd(av);
            double* crow = c + i * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d c0 = _mm256_loadu_pd(crow + j);
                c0 = _mm256_fmadd_pd(avv, _mm256_loadu_pd(brow + j), c0);
                _mm256_storeu_pd(crow + j, c0);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void add_bias_rows_avx2(std::size_t rows, std::size_t cols, const double* bias, double* x) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = x + i * cols;
        std::size_t j = 0;
        for (; j + 4 <= cols; j += 4) {
            __m256d v = _mm256_add_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(bias + j));
            _mm256_storeu_pd(row + j, v);
        }
        for (; j < cols; ++j) row[j] += bias[j];
    }
}

void relu_avx2(std::size_t n, const double* x, double* y) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(std::size_t n, const double* x, const double* dy, double* dx) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(dx + i, _mm256_and_pd(_mm256_loadu_pd(dy + i), mask));
    }
    for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void adam_step_avx2(std::size_t n, double* param, const double* grad, double* m, double* v,
                    double lr, double beta1, double beta2, double eps,
                    double bias1, double bias2) {
    const __m256d b1 = _mm256_set1_pd(beta1);
    const __m256d b2 = _mm256_set1_pd(beta2);
    const __m256d one_minus_b1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d one_minus_b2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d inv_bias1 = _mm256_set1_pd(1.0 / bias1);
    const __m256d inv_bias2 = _mm256_set1_pd(1.0 / bias2);
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d epsv = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        __m256d mi = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), _mm256_mul_pd(one_minus_b1, g));
        __m256d vi = _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i),
                                     _mm256_mul_pd(one_minus_b2, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d mhat = _mm256_mul_pd(mi, inv_bias1);
        const __m256d vhat = _mm256_mul_pd(vi, inv_bias2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom);
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
    }
    for (; i < n; ++i) {
        const double g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Backend* avx2_backend_impl() {
    static const Backend backend{
        "avx2",
        gemm_nn_avx2,
        gemm_nt_avx2,
        gemm_tn_avx2,
        add_bias_rows_avx2,
        relu_avx2,
        relu_backward_avx2,
        adam_step_avx2,
    };
    return &backend;
}

}  // namespace relabel::kernels
