#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hcrf {

// Selects between the OpenMP kernels and the single-threaded reference
// kernels kept for cross-checking.
enum class Execution { parallel, serial };

inline void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace hcrf
