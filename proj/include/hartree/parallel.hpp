#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hartree {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> threads{1};
  return threads;
}
}  // namespace detail

/// Worker count used by parallel loops (default 1).
inline void set_thread_count(unsigned k) { detail::thread_setting() = std::max(1u, k); }
inline unsigned thread_count() { return detail::thread_setting(); }

/// Runs fn(i) for i in [0, count). Each index must write only to its own
/// output slot; reductions happen afterwards in index order, so results do
/// not depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace hartree
