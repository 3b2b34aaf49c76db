#include "handsplat/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace handsplat {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(size_t n, int threads,
                  const std::function<void(size_t, size_t)>& fn) {
  if (n == 0) return;
  int t = resolve_threads(threads);
  size_t workers = std::min<size_t>(static_cast<size_t>(t), n);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    size_t begin = w * chunk;
    size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace handsplat
