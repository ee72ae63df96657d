#pragma once

// Static-chunk parallel loop. Work item i always runs the same code on the
// same inputs, so results depend only on the index, never on scheduling.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace predint {

/// Thread cap from PREDINT_THREADS; 0 when unset, empty, or unparsable.
inline unsigned env_thread_cap() {
  const char* raw = std::getenv("PREDINT_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  char* end = nullptr;
  const unsigned long v = std::strtoul(raw, &end, 10);
  if (end == raw || *end != '\0') return 0;
  return static_cast<unsigned>(std::min<unsigned long>(v, 4096));
}

/// Worker count for a request of `requested` threads (0 = auto). A nonzero
/// PREDINT_THREADS caps the result.
inline unsigned resolve_threads(unsigned requested = 0) {
  unsigned n = requested;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  const unsigned cap = env_thread_cap();
  if (cap > 0) n = std::min(n, cap);
  return std::max(1u, n);
}

/// Calls body(i) for i in [0, count). If any call throws, the exception of
/// the lowest failing index is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t count, Body&& body, unsigned threads = 0) {
  if (count == 0) return;
  const std::size_t workers = std::min<std::size_t>(resolve_threads(threads), count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::size_t> error_index(workers, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      for (std::size_t i = begin; i < end; ++i) {
        try {
          body(i);
        } catch (...) {
          errors[w] = std::current_exception();
          error_index[w] = i;
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  std::size_t first = count;
  std::exception_ptr err;
  for (std::size_t w = 0; w < workers; ++w) {
    if (errors[w] && error_index[w] < first) {
      first = error_index[w];
      err = errors[w];
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace predint
