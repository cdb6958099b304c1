#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace biowish {

// Worker count: BIOWISH_THREADS env var if set, else hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("BIOWISH_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Runs tasks[0..n) on up to thread_count() threads. Tasks are independent
// closures writing only to their own slot of any result vector, so the
// output is identical regardless of scheduling. Exceptions are rethrown
// on the caller thread.
inline void parallel_tasks(std::size_t n, const std::function<void(std::size_t)>& task) {
  if (n == 0) return;
  const unsigned workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          task(i);
        } catch (const std::exception& e) {
          if (!failed.exchange(true)) error = e.what();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) throw std::runtime_error(error.empty() ? "task failed" : error);
}

}  // namespace biowish
