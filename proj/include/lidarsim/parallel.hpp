#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace lidarsim {

inline unsigned default_thread_count() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Splits [0, n) into `threads` contiguous chunks and runs fn(chunk_id, begin, end)
/// on each. Chunk 0 runs on the calling thread.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  threads = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1)));
  if (threads == 1) {
    fn(0u, std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads - 1);
  const std::size_t step = (n + threads - 1) / threads;
  for (unsigned t = 1; t < threads; ++t) {
    const std::size_t b = std::min(n, t * step), e = std::min(n, b + step);
    workers.emplace_back([&fn, t, b, e] { fn(t, b, e); });
  }
  fn(0u, std::size_t{0}, std::min(n, step));
}

}  // namespace lidarsim
