#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hullaudit/error.hpp"

namespace hullaudit {

/// Worker count from HULLAUDIT_THREADS, if set and valid.
inline std::optional<int> threads_from_env() {
  const char* v = std::getenv("HULLAUDIT_THREADS");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n <= 0 || n > 4096) {
    throw Error(ErrorCode::ConfigError, "HULLAUDIT_THREADS must be a positive integer, got '" + std::string(v) + "'");
  }
  return static_cast<int>(n);
}

/// 0 means one per hardware thread.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Work is handed out
/// by index, so anything fn writes to slot i does not depend on scheduling.
/// The first exception thrown by fn is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  threads = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (!stop.load(std::memory_order_relaxed)) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace hullaudit
