#pragma once
// Serial/parallel execution switch for the data-parallel kernels. The serial
// path is the reference implementation; the parallel path must produce
// bit-identical results, which holds because every kernel writes disjoint
// output slots and never reduces across iterations.

#include <cstddef>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace finsrag {

enum class ExecMode { serial, parallel };

template <class F>
void for_each_index(size_t n, ExecMode mode, F&& f) {
#ifdef _OPENMP
    if (mode == ExecMode::parallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) f(static_cast<size_t>(i));
        return;
    }
#else
    (void)mode;
#endif
    for (size_t i = 0; i < n; ++i) f(i);
}

}  // namespace finsrag
