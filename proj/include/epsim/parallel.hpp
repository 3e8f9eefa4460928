#pragma once

// Thread-count policy and a static-partition parallel loop. Results never depend on the
// thread count: work item k always receives the same inputs.

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace epsim {

/// Hardware concurrency capped by EPSIM_MAX_THREADS (when set to a positive integer).
inline unsigned max_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EPSIM_MAX_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Calls body(k) for k in [0, count) on up to max_threads() threads.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(max_threads(), count));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < count; k += threads) body(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace epsim
