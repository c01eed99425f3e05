#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace apreg {

inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(begin, end) over contiguous chunks of [0, total). Results must
/// be combined by the caller with an associative reduction so the outcome
/// is identical for any worker count.
template <typename Fn>
void parallel_chunks(std::size_t total, int threads, Fn&& fn) {
  threads = resolve_thread_count(threads);
  if (total == 0) return;
  if (threads <= 1 || total == 1) {
    fn(std::size_t{0}, total);
    return;
  }
  std::size_t n_chunks = std::min<std::size_t>(static_cast<std::size_t>(threads), total);
  std::size_t chunk = (total + n_chunks - 1) / n_chunks;
  std::vector<std::thread> pool;
  pool.reserve(n_chunks);
  for (std::size_t c = 0; c < n_chunks; ++c) {
    std::size_t begin = c * chunk;
    std::size_t end = std::min(begin + chunk, total);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace apreg
