#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace riskmap {

inline int hardware_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Runs fn(i) for i in [0, n). workers <= 1 gives the serial reference path;
// otherwise iterations are dispatched to an OpenMP pool. Bodies must write
// only to their own slots, so results do not depend on the worker count.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (int i = 0; i < n; ++i) fn(i);
#else
  for (int i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace riskmap
