#pragma once

#include <cstddef>
#include <functional>

namespace stripescan {

// Worker cap from STRIPESCAN_THREADS (0 or unset = hardware concurrency).
unsigned worker_count();

// Runs fn(i) for i in [0, n). Each index is handled exactly once; callers
// write results into pre-sized slots so output order never depends on
// scheduling. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned workers = worker_count());

}  // namespace stripescan
