#pragma once

// Thin wrappers so the rest of the code does not need to guard every
// omp_* call. Builds without OpenMP run everything serially.

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cinet {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace cinet
