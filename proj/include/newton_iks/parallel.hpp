#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace newton_iks {

/// Thread cap for optional parallel sections, from NEWTON_IKS_THREADS
/// (default 1, invalid values fall back to 1).
std::size_t configured_threads();

/// Calls body(i) for i in [0, count) on up to `threads` threads, in
/// contiguous chunks. The first exception thrown by any chunk is rethrown.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      body(i);
    }
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    const std::size_t chunk = (count + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          const std::size_t end = std::min(count, (t + 1) * chunk);
          for (std::size_t i = t * chunk; i < end; ++i) {
            body(i);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace newton_iks
