#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deva {

// Caps the OpenMP worker count for all kernels. 0 keeps the runtime default.
inline void set_thread_cap(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace deva
