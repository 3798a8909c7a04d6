#include "relabel/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace relabel::kernels {

#if defined(RELABEL_HAVE_AVX2)
const Backend* avx2_backend_impl();
#endif

bool avx2_compiled() {
#if defined(RELABEL_HAVE_AVX2)
    return true;
#else
    return false;
#endif
}

bool avx2_runtime_supported() {
#if defined(RELABEL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Backend* avx2_backend() {
#if defined(RELABEL_HAVE_AVX2)
    if (avx2_runtime_supported()) return avx2_backend_impl();
#endif
    return nullptr;
}

namespace {
std::atomic<bool> g_force_scalar{false};

const Backend* detect() {
    if (const char* env = std::getenv("RELABEL_FORCE_SCALAR"); env && env[0] == '1')
        return &scalar_backend();
    if (const Backend* b = avx2_backend()) return b;
    return &scalar_backend();
}
}  // namespace

const Backend& active() {
    if (g_force_scalar.load(std::memory_order_relaxed)) return scalar_backend();
    static const Backend* chosen = detect();
    return *chosen;
}

void set_force_scalar(bool force) {
    g_force_scalar.store(force, std::memory_order_relaxed);
}

}  // namespace relabel::kernels
