#pragma once

// Deterministic data parallelism: tasks are dispatched dynamically (idle
// workers grab the next index), but each task writes only its own slot, so
// any serial reduction over the slots is invariant to worker count and
// scheduling.

#include <cstddef>
#include <functional>

namespace gt {

// requested == 0 means hardware concurrency; result is always >= 1.
int resolve_worker_count(int requested);

// Runs fn(i) for every i in [0, count) using at most worker_count threads.
// Blocks until all tasks finish; rethrows the first task exception.
void parallel_for(std::size_t count, int worker_count,
                  const std::function<void(std::size_t)>& fn);

}  // namespace gt
