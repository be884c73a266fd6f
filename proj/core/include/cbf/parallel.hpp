// parallel.hpp
// Static partition of independent work items over a thread pool. Bins never
// share state, so this is the only concurrency primitive the library needs.

#pragma once

#include <functional>

namespace cbf {

// Runs fn(i) for i in [0, n). threads <= 0 uses the hardware count. The
// first exception thrown by any worker is rethrown on the calling thread.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace cbf
