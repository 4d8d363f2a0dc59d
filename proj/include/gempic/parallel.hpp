#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gempic {

// Splits [0, n) into `workers` contiguous chunks and calls
// body(worker, begin, end) for each, one thread per chunk. The chunking
// depends only on n and workers, so per-worker results merged in worker
// order are reproducible. The first exception thrown by a worker is rethrown.
template <class Body>
void parallel_chunks(std::size_t n, int workers, Body&& body) {
  const std::size_t w = static_cast<std::size_t>(std::max(1, workers));
  auto bounds = [&](std::size_t k) { return n * k / w; };
  if (w == 1 || n < 2) {
    for (std::size_t k = 0; k < w; ++k) {
      body(static_cast<int>(k), bounds(k), bounds(k + 1));
    }
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    threads.emplace_back([&, k] {
      try {
        body(static_cast<int>(k), bounds(k), bounds(k + 1));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) {
    t.join();
  }
  for (auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace gempic
