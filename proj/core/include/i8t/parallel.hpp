#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace i8t {

// Static contiguous split of [begin, end) across `threads` workers. Callers
// guarantee disjoint writes; used only where any split yields bit-identical
// results.
inline void parallel_for(int64_t begin, int64_t end, int threads,
                         const std::function<void(int64_t, int64_t)>& body) {
  const int64_t n = end - begin;
  if (n <= 0) return;
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads > n) threads = static_cast<int>(n);
  if (threads <= 1) {
    body(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    int64_t lo = begin + n * t / threads;
    int64_t hi = begin + n * (t + 1) / threads;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace i8t
