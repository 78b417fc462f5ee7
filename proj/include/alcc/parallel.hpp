#ifndef ALCC_PARALLEL_HPP
#define ALCC_PARALLEL_HPP

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace alcc {

// workers <= 0 means "use all hardware threads"; 1 forces the serial path.
inline int resolve_workers(int requested) {
#ifdef _OPENMP
  if (requested <= 0) return omp_get_max_threads();
  return requested;
#else
  (void)requested;
  return 1;
#endif
}

// Runs f(i) for i in [0, n). Work items must be independent and own their
// seeds; results are then identical for any worker count.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
  workers = resolve_workers(workers);
#ifdef _OPENMP
  if (workers > 1) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      f(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace alcc

#endif
