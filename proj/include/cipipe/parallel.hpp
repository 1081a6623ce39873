#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cipipe {

/// 0 means "use the machine's parallelism".
inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, n) into `chunks` contiguous ranges and calls fn(chunk, begin, end)
/// for each, one thread per chunk. Chunk boundaries depend only on n and chunks,
/// so callers that combine per-chunk results in chunk order are reproducible.
template <typename Fn>
void for_each_chunk(std::size_t n, int chunks, Fn&& fn) {
  chunks = std::max(1, chunks);
  const auto c = static_cast<std::size_t>(chunks);
  auto bounds = [&](std::size_t k) { return n * k / c; };
  if (chunks == 1 || n < c) {
    for (std::size_t k = 0; k < c; ++k) fn(k, bounds(k), bounds(k + 1));
    return;
  }
  std::vector<std::exception_ptr> errors(c);
  {
    std::vector<std::jthread> pool;
    pool.reserve(c - 1);
    for (std::size_t k = 1; k < c; ++k) {
      pool.emplace_back([&, k] {
        try {
          fn(k, bounds(k), bounds(k + 1));
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
    try {
      fn(std::size_t{0}, bounds(0), bounds(1));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace cipipe
