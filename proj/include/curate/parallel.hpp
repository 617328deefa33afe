#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace curate {

// Runs fn(i) for i in [0, n) over `workers` threads using contiguous static
// blocks. fn must write only to slot i of preallocated output, which keeps
// results independent of the worker count. The exception from the lowest
// block is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t blocks = std::min<std::size_t>(workers, n);
  std::vector<std::exception_ptr> errors(blocks);
  {
    std::vector<std::jthread> threads;
    threads.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
      threads.emplace_back([&, b] {
        const std::size_t begin = n * b / blocks;
        const std::size_t end = n * (b + 1) / blocks;
        try {
          for (std::size_t i = begin; i < end; ++i) fn(i);
        } catch (...) {
          errors[b] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace curate
