#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mvgeom {

/// Worker count from MVGEOM_THREADS, falling back to the hardware count.
inline unsigned default_threads() {
  if (const char* env = std::getenv("MVGEOM_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
/// Chunk boundaries depend only on n and chunk, never on the worker count, so
/// per-chunk partial results reduced in chunk order are worker-independent.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t chunk, unsigned threads, Fn&& fn) {
  if (n == 0) return;
  chunk = std::max<std::size_t>(1, chunk);
  const std::size_t chunks = (n + chunk - 1) / chunk;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), chunks));

  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        fn(c, c * chunk, std::min(n, (c + 1) * chunk));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = chunks;
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Ordered sum of f(i) for i in [0, n); identical bits for any worker count.
template <typename Fn>
double parallel_sum(std::size_t n, unsigned threads, Fn&& f, std::size_t chunk = 4096) {
  const std::size_t chunks = n == 0 ? 0 : (n + chunk - 1) / chunk;
  std::vector<double> partial(chunks, 0.0);
  parallel_chunks(n, chunk, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    double acc = 0.0;
    for (std::size_t i = b; i < e; ++i) acc += f(i);
    partial[c] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace mvgeom
