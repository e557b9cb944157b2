#ifndef MAPPRIOR_PARALLEL_H_
#define MAPPRIOR_PARALLEL_H_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mapprior {

// Number of worker threads: hardware concurrency, capped by the
// MAPPRIOR_THREADS environment variable when it holds a positive integer.
int WorkerCount();

// Calls fn(i) for every i in [0, count) on up to `workers` threads. Work
// items are claimed dynamically, so fn must not depend on execution order.
// The first exception thrown by fn is rethrown after all workers join.
template <typename Fn>
void ParallelFor(std::size_t count, Fn&& fn, int workers = WorkerCount()) {
  const std::size_t threads =
      std::min<std::size_t>(count, static_cast<std::size_t>(
                                       std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(run);
  run();
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mapprior

#endif  // MAPPRIOR_PARALLEL_H_
