#include "dpsinkhorn/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dpsinkhorn {

namespace {
int g_max_threads = 0;  // 0 = hardware default
}

void set_max_threads(int n) {
    g_max_threads = n < 1 ? 0 : n;
#ifdef _OPENMP
    if (g_max_threads > 0) omp_set_num_threads(g_max_threads);
#endif
}

int max_threads() {
#ifdef _OPENMP
    return g_max_threads > 0 ? g_max_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

namespace detail {

void parallel_for_impl(size_t n, void (*fn)(size_t, void*), void* ctx) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        fn(static_cast<size_t>(i), ctx);
    }
#else
    for (size_t i = 0; i < n; ++i) fn(i, ctx);
#endif
}

}  // namespace detail

}  // namespace dpsinkhorn
