#pragma once

#include <cstddef>
#include <functional>

namespace procal::detail {

// Worker count: PROCAL_THREADS when set, else hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [begin, end) over a static block partition. Each index
// is processed exactly once by one thread, so per-index results are
// deterministic regardless of the worker count. The first exception thrown
// by any worker is rethrown.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn);

}  // namespace procal::detail
