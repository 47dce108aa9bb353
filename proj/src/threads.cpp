#include "svlf/threads.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace svlf {

namespace {
int g_threads = 0;
}

void set_thread_count(int n) { g_threads = n > 0 ? n : 0; }

int thread_count() {
    if (g_threads > 0) return g_threads;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace svlf
