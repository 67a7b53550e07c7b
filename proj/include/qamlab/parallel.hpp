#pragma once
// Plain block-partitioned thread pool helper.  Each index writes its own
// output slot, so results do not depend on scheduling.

#include <cstddef>
#include <thread>
#include <vector>

namespace qamlab {

template <class Fn>
void parallel_for(std::size_t n, unsigned n_threads, Fn&& fn) {
  if (n == 0) return;
  if (n_threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (n_threads > n) n_threads = static_cast<unsigned>(n);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (unsigned t = 0; t < n_threads; ++t) {
    const std::size_t lo = n * t / n_threads;
    const std::size_t hi = n * (t + 1) / n_threads;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace qamlab
