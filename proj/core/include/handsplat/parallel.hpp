#pragma once

#include <cstddef>
#include <functional>

namespace handsplat {

// Number of worker threads implied by a --threads style setting:
// 0 means "use hardware concurrency", anything else is taken literally.
int resolve_threads(int requested);

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
// worker. The partition depends only on (n, threads), so per-chunk results
// are reproducible for a fixed thread count; with threads == 1 the call is
// a plain loop on the calling thread.
void parallel_for(size_t n, int threads,
                  const std::function<void(size_t, size_t)>& fn);

}  // namespace handsplat
