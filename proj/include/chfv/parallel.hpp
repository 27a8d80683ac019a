#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace chfv {

/// Calls body(begin, end) on contiguous chunks of [0, n). Chunks are
/// disjoint, so bodies that write only to their own indices give results
/// independent of the thread count.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(1U, threads), n / 256 + 1);
  if (workers <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(std::size_t{0}, std::min(n, chunk));
}

}  // namespace chfv
