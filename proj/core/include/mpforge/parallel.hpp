#pragma once

#include <cstddef>
#include <functional>

namespace mpforge {

/// Worker count for a request of `requested` (0: hardware concurrency), capped by `tasks`.
int resolve_workers(int requested, std::size_t tasks);

/// Runs fn(0..count-1) on a pool of jthreads pulling indices from a shared counter.
/// Each index runs exactly once; the first exception by index order is rethrown after the join.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace mpforge
