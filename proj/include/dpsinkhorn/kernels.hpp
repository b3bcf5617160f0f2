#pragma once

#include <cstddef>

namespace dpsinkhorn {

// Execution mode of the data-parallel kernels. Every kernel runs the same
// per-index routine in both modes; the mode only chooses the loop driver, so
// results are bitwise identical by construction — numbers never depend on
// how the index range was partitioned.
enum class Exec {
    kSerial,
    kParallel,
};

// Caps the number of OpenMP worker threads (CLI --threads). Values < 1 reset
// to the hardware default. No-op when built without OpenMP.
void set_max_threads(int n);
int max_threads();

namespace detail {

void parallel_for_impl(size_t n, void (*fn)(size_t, void*), void* ctx);

template <class F>
struct CallableRef {
    static void call(size_t i, void* ctx) { (*static_cast<F*>(ctx))(i); }
};

}  // namespace detail

// Runs fn(i) for i in [0, n). kParallel distributes indices over OpenMP
// threads with a static schedule; kSerial is the reference loop. fn must not
// touch state shared across indices (other than disjoint writes).
template <class F>
void for_each_index(size_t n, Exec mode, F&& fn) {
    if (mode == Exec::kParallel) {
        detail::parallel_for_impl(n, &detail::CallableRef<F>::call, &fn);
    } else {
        for (size_t i = 0; i < n; ++i) fn(i);
    }
}

}  // namespace dpsinkhorn
