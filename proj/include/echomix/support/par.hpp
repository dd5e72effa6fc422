#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace echomix::par {

/// OpenMP-backed index loop with a serial fallback. Results must be
/// written to per-index slots so the outcome is identical for any thread
/// count; reductions happen serially afterwards.
template <class F>
void for_index(size_t n, F&& f) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < (long long)n; ++i) f(size_t(i));
#else
    for (size_t i = 0; i < n; ++i) f(i);
#endif
}

/// Serial reference loop with the same contract; kept so tests and the
/// benchmark can compare the two paths.
template <class F>
void for_index_serial(size_t n, F&& f) {
    for (size_t i = 0; i < n; ++i) f(i);
}

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace echomix::par
