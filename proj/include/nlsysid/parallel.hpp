#pragma once

#include <cstddef>
#include <functional>

namespace nlsysid {

/// Worker count: NLSYSID_THREADS when set to a positive integer, otherwise
/// std::thread::hardware_concurrency() (at least 1).
int worker_count();

/// Calls fn(i) for i in [0, n) on up to worker_count() threads. Indices are
/// claimed dynamically; callers write results by index so the outcome does
/// not depend on scheduling. The first exception thrown is rethrown after all
/// workers have stopped.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace nlsysid
