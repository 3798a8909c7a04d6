#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "relabel/kernels.hpp"
#include "relabel/rng.hpp"

using namespace relabel;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
        CHECK(std::fabs(a[i] - b[i]) <= tol * scale);
    }
}

}  // namespace

TEST_CASE("gemm_nn scalar matches naive triple loop") {
    Rng rng(7);
    const std::size_t m = 5, k = 9, n = 13;
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    std::vector<double> c(m * n), expect(m * n, 0.0);
    kernels::scalar_backend().gemm_nn(m, k, n, a.data(), b.data(), c.data());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
            expect[i * n + j] = acc;
        }
    check_close(c, expect, 1e-12);
}

TEST_CASE("gemm transposed variants agree with explicit transposition") {
    Rng rng(11);
    const std::size_t m = 4, k = 6, n = 7;
    const auto a = random_vec(m * k, rng);   // m x k
    const auto bt = random_vec(n * k, rng);  // n x k
    const auto at = random_vec(k * m, rng);  // k x m
    const auto b = random_vec(k * n, rng);   // k x n
    const auto& backend = kernels::scalar_backend();

    // nt: c = a * bt^T
    std::vector<double> b_t(k * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t l = 0; l < k; ++l) b_t[l * n + j] = bt[j * k + l];
    std::vector<double> c1(m * n), c2(m * n);
    backend.gemm_nt(m, k, n, a.data(), bt.data(), c1.data());
    backend.gemm_nn(m, k, n, a.data(), b_t.data(), c2.data());
    check_close(c1, c2, 1e-12);

    // tn: c = at^T * b
    std::vector<double> a_t(m * k);
    for (std::size_t l = 0; l < k; ++l)
        for (std::size_t i = 0; i < m; ++i) a_t[i * k + l] = at[l * m + i];
    backend.gemm_tn(m, k, n, at.data(), b.data(), c1.data());
    backend.gemm_nn(m, k, n, a_t.data(), b.data(), c2.data());
    check_close(c1, c2, 1e-12);
}

TEST_CASE("adam_step first update moves a scalar parameter by ~lr") {
    // Bias-corrected first step with gradient 1: delta = lr / (1 + eps) ~ lr.
    double p = 0.5, g = 1.0, m = 0.0, v = 0.0;
    const double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    kernels::scalar_backend().adam_step(1, &p, &g, &m, &v, lr, beta1, beta2, eps,
                                        1.0 - beta1, 1.0 - beta2);
    CHECK(p == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
}

TEST_CASE("avx2 variants match scalar reference") {
    if (!kernels::avx2_backend()) {
        MESSAGE("avx2 backend unavailable; skipping equivalence checks");
        return;
    }
    const auto& scalar = kernels::scalar_backend();
    const auto& simd = *kernels::avx2_backend();
    Rng rng(1234);

    for (int repeat = 0; repeat < 20; ++repeat) {
        const std::size_t m = 1 + rng.bounded(12);
        const std::size_t k = 1 + rng.bounded(40);
        const std::size_t n = 1 + rng.bounded(40);

        const auto a = random_vec(m * k, rng);
        const auto b = random_vec(k * n, rng);
        const auto bt = random_vec(n * k, rng);
        const auto at = random_vec(k * m, rng);

        std::vector<double> c1(m * n), c2(m * n);
        scalar.gemm_nn(m, k, n, a.data(), b.data(), c1.data());
        simd.gemm_nn(m, k, n, a.data(), b.data(), c2.data());
        check_close(c1, c2, 1e-11);

        scalar.gemm_nt(m, k, n, a.data(), bt.data(), c1.data());
        simd.gemm_nt(m, k, n, a.data(), bt.data(), c2.data());
        check_close(c1, c2, 1e-11);

        scalar.gemm_tn(m, k, n, at.data(), b.data(), c1.data());
        simd.gemm_tn(m, k, n, at.data(), b.data(), c2.data());
        check_close(c1, c2, 1e-11);

        const std::size_t len = 1 + rng.bounded(200);
        auto x = random_vec(len, rng, -2.0, 2.0);
        auto dy = random_vec(len, rng);
        std::vector<double> y1(len), y2(len);
        scalar.relu(len, x.data(), y1.data());
        simd.relu(len, x.data(), y2.data());
        check_close(y1, y2, 0.0);
        scalar.relu_backward(len, x.data(), dy.data(), y1.data());
        simd.relu_backward(len, x.data(), dy.data(), y2.data());
        check_close(y1, y2, 0.0);

        auto bias = random_vec(n, rng);
        auto x1 = random_vec(m * n, rng);
        auto x2 = x1;
        scalar.add_bias_rows(m, n, bias.data(), x1.data());
        simd.add_bias_rows(m, n, bias.data(), x2.data());
        check_close(x1, x2, 0.0);

        auto p1 = random_vec(len, rng);
        auto p2 = p1;
        auto grad = random_vec(len, rng);
        auto m1 = random_vec(len, rng, 0.0, 1.0), m2 = m1;
        auto v1 = random_vec(len, rng, 0.0, 1.0), v2 = v1;
        scalar.adam_step(len, p1.data(), grad.data(), m1.data(), v1.data(), 1e-3, 0.9, 0.999,
                         1e-8, 0.1, 0.001);
        simd.adam_step(len, p2.data(), grad.data(), m2.data(), v2.data(), 1e-3, 0.9, 0.999,
                       1e-8, 0.1, 0.001);
        check_close(p1, p2, 1e-12);
        check_close(m1, m2, 1e-12);
        check_close(v1, v2, 1e-12);
    }
}

TEST_CASE("force_scalar overrides the dispatched backend") {
    kernels::set_force_scalar(true);
    CHECK(std::string(kernels::active().name) == "scalar");
    kernels::set_force_scalar(false);
    const char* env = std::getenv("RELABEL_FORCE_SCALAR");
    const bool env_forced = env && env[0] == '1';
    if (kernels::avx2_backend() && !env_forced)
        CHECK(std::string(kernels::active().name) == "avx2");
}
