#pragma once

#include <cstddef>
#include <functional>

namespace ursa {

// Worker count: hardware concurrency, capped by URSA_THREADS when set.
std::size_t worker_count();

// Calls fn(i) for every i in [0, count), split into contiguous chunks over up
// to `threads` threads. Each index is visited exactly once; callers write
// results into per-index slots so the outcome is independent of the split.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace ursa
