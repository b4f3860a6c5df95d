#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace srgeo {

// Worker cap: SRGEO_THREADS if set, hardware concurrency otherwise.
inline int thread_budget() {
  if (const char* env = std::getenv("SRGEO_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Static block partition of [0, count); fn(i) must only write state owned by
// index i, which keeps results identical for every worker count.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  int workers = thread_budget();
  if (workers <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  workers = static_cast<int>(std::min<std::size_t>(workers, count));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk, hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace srgeo
